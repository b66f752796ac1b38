"""Case/control classification of SNP genotype data.

Two pipelines share one data layer: random projection followed by k-NN,
and MTD feature selection followed by a random forest.
"""

__version__ = "0.1.0"
