"""
Image primitives: thresholding, dilation, components, resizing
===============================================================

Walks the low-level operations the page pipeline is built from, on a
tiny synthetic tablet photo.
"""


from cuneo.imaging import (
    StructuringElement,
    connected_components,
    content_bbox,
    dilate,
    otsu_threshold,
    resize_to_width,
)
from cuneo.synthetic import stamp_page, wedge_glyph_catalog

# a small "photographed tablet": two glyphs stamped on a light background
catalog = wedge_glyph_catalog(2, side=48, seed=3)
page, records = stamp_page([c.master for c in catalog], [[0, 1]], stamp_size=48)
print("page", page.shape, page.dtype, "ink pixels:", int((page < 128).sum()))

# Otsu picks the threshold that best separates ink from background;
# ties go to the smallest threshold
ink, t = otsu_threshold(page)
print("otsu threshold:", t, " foreground px:", int(ink.sum()))

# dilation closes the gaps between the wedge strokes of one sign
merged = dilate(ink, StructuringElement(radius_x=1, radius_y=1), iterations=2)
comps_before = connected_components(ink)
comps_after = connected_components(merged)
print("components before dilation:", len(comps_before), " after:", len(comps_after))
assert len(comps_after) == len(records)

for c in comps_after:
    print("  component bbox", c.bbox, "pixels", c.pixel_count)

# resize keeps proportions; widths land exactly on the requested value
wide = resize_to_width(page, 300)
print("resized:", page.shape, "->", wide.shape)

# the content box is what glyph extraction crops to
x0, y0, x1, y1 = content_bbox(ink)
print("ink content box: x", (x0, x1), " y", (y0, y1))
