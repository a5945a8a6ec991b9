from .directory import GridDirectory, build_directory, candidates, mbr_intersects
from .histio import read_histogram, write_histogram
from .quadtree import PdfQuadTree, build_quadtree, compress, decompose

__all__ = [
    "GridDirectory", "PdfQuadTree", "build_directory", "build_quadtree", "candidates",
    "compress", "decompose", "mbr_intersects", "read_histogram", "write_histogram",
]
