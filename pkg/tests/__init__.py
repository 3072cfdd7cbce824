"""Tests for bengali-math-solver."""
