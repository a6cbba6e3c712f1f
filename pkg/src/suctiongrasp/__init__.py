"""Object-aware suction grasp sampling, ray-cast seal evaluation and dataset annotation."""
__version__ = "0.1.0"
