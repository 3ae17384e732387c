"""Star-shaped band fixtures shared by the PHD tests.

Each entry maps a name to (band, inner radius fn, outer radius fn).
"""
from epsedge.synthgen import annulus, contour_band, ellipse_radius, square_radius

BANDS = {
    "annulus-10-15": (annulus(10, 15), lambda t: 10.0, lambda t: 15.0),
    "annulus-8-10": (annulus(8, 10), lambda t: 8.0, lambda t: 10.0),
    "annulus-12-20": (annulus(12, 20, 96), lambda t: 12.0, lambda t: 20.0),
    "squares-8-12": (contour_band(square_radius(8), square_radius(12)),
                     square_radius(8), square_radius(12)),
    "ellipse-in-circle": (contour_band(ellipse_radius(12, 8), 16.0),
                          ellipse_radius(12, 8), lambda t: 16.0),
}
