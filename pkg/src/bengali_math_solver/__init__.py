"""Bengali Math Solver - detections of handwritten math symbols to evaluated expressions."""

__version__ = "0.1.0"
