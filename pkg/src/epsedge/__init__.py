"""Edge-band supervision for segmentation: thickness-controlled edge labels,
a polar band-thickness distance and its loss, reference boundary losses,
metrics, synthetic data and a small trainer with a copied auxiliary head."""

from .edges import extract_edge_label_map, extract_edge_mask, kernel_for_thickness
from .imagecore import LabelMap, exact_edt, load_pgm, save_pgm
from .polar import ph_loss, phd_exact, phd_smooth

__all__ = [
    "LabelMap", "exact_edt", "extract_edge_label_map", "extract_edge_mask",
    "kernel_for_thickness", "load_pgm", "ph_loss", "phd_exact", "phd_smooth", "save_pgm",
]
