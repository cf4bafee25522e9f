"""
Page segmentation: from a scan to ordered glyph boxes
=====================================================

Stamps a page with a known layout, then recovers character boxes in
reading order (lines top to bottom, columns left to right).
"""

from cuneo.imageio import write_pgm, write_ppm
from cuneo.imaging import resize_to_width
from cuneo.segmentation import SegmentationParams, overlay_boxes, segment_page
from cuneo.synthetic import stamp_page, wedge_glyph_catalog

catalog = wedge_glyph_catalog(5, side=48, seed=4)
layout = [[0, 1, 2], [3, 4, 0, 1], [2, 3]]
page, records = stamp_page([c.master for c in catalog], layout, stamp_size=48)
write_pgm("demo_output/page.pgm", page)
print("stamped", len(records), "glyphs on a", page.shape, "page")

params = SegmentationParams()  # 1000 px working width, 64 px glyphs
segmentation, glyphs = segment_page(page, params)
print("found", len(segmentation.boxes), "boxes in",
      segmentation.num_lines, "lines")

for box, rec in zip(segmentation.boxes, records):
    marker = "ok" if (box.line_index, box.column_index) == (rec.line_index, rec.column_index) else "MISMATCH"
    print(f"  line {box.line_index} col {box.column_index}  bbox {box.bbox}  {marker}")

# every glyph is refit to the square classifier input
print("glyph tiles:", len(glyphs), "of shape", glyphs[0].shape)

resized = resize_to_width(page, params.target_width)
write_ppm("demo_output/page_boxes.ppm", overlay_boxes(resized, segmentation.boxes))
print("wrote demo_output/page.pgm and demo_output/page_boxes.ppm")
