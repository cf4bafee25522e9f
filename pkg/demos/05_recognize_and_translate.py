"""
Recognizing a page and translating the sign sequence
====================================================

The full pipeline: train a small classifier, stamp a fresh page from
the same sign classes, recognize every glyph, and assemble dictionary
words by greedy longest match.  With ground truth supplied, the overlay
marks correct boxes green and misses red.
"""

from cuneo.dataset import SplitSpec, build_dataset, split_dataset, to_arrays
from cuneo.lexicon import Lexicon, LexiconEntry, relative_accuracy, translate_page
from cuneo.nn import TrainConfig, default_model_config, init_params, train
from cuneo.synthetic import stamp_page, wedge_glyph_catalog

catalog = wedge_glyph_catalog(6, side=48, seed=2)
names = tuple(c.sign_name for c in catalog)

samples, _ = build_dataset([(c.sign_name, c.master) for c in catalog],
                           glyph_size=32)
split = split_dataset(samples, SplitSpec(), sign_names=names)
x_tr, y_tr = to_arrays(split.train)
x_va, y_va = to_arrays(split.val)

config = default_model_config(num_classes=len(names), input_side=32,
                              class_names=names)
params, log = train(config, init_params(config), x_tr, y_tr, x_va, y_va,
                    TrainConfig(max_epochs=12, patience=4))
print("trained for", len(log.epochs), "epochs")

# a dictionary over the synthetic sign names; one two-sign word
lexicon = Lexicon([
    LexiconEntry((names[0],), "awilum", "man"),
    LexiconEntry((names[1], names[2]), "sarrum", "king"),
    LexiconEntry((names[3],), "alaku", "to-go"),
])

layout = [[0, 1, 2], [3, 4, 5]]
page, records = stamp_page([c.master for c in catalog], layout, stamp_size=48)
truth = tuple(names[r.class_id] for r in records)

from cuneo.segmentation import SegmentationParams

result = translate_page(page, config, params, lexicon,
                        seg_params=SegmentationParams(glyph_size=32),
                        out_dir="demo_output", truth=truth)
print("predicted:", " ".join(result.predicted))
print("truth:    ", " ".join(truth))
print("relative accuracy:", round(relative_accuracy(result.predicted, truth), 4))
for w in result.translation.words:
    print(f"  word at {w.position}: {','.join(w.signs)} -> {w.akkadian} ({w.english})")
for pos, sign in result.translation.unmatched:
    print(f"  sign at {pos}: {sign} (not in lexicon)")
if result.report is not None:
    print("green boxes:", result.report.green_count, "of", len(result.predicted))
print("outputs in demo_output/: page_boxes.tsv, page_predictions.tsv,",
      "page_translation.tsv, page_report.tsv, page_report.ppm")
