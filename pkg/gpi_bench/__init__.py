"""
GPI Bench - good policy identification in tabular episodic MDPs: the phased
BEE-GPI algorithm, a BPI-UCRL comparator, benchmark instances and an experiment harness.
"""

__version__ = "0.3.0"
