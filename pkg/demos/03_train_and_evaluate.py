"""
Training the glyph classifier and reading its metrics
=====================================================

Small end-to-end run: dataset -> CNN -> early stopping -> confusion
metrics.  Uses a reduced geometry so it finishes in well under a minute.
"""

from cuneo.dataset import SplitSpec, build_dataset, split_dataset, to_arrays
from cuneo.metrics import evaluate, report_text
from cuneo.nn import (
    TrainConfig,
    default_model_config,
    init_params,
    predict,
    save_model,
    train,
)
from cuneo.synthetic import wedge_glyph_catalog

catalog = wedge_glyph_catalog(6, side=48, seed=2)
samples, names = build_dataset([(c.sign_name, c.master) for c in catalog],
                               glyph_size=32)
split = split_dataset(samples, SplitSpec(), sign_names=names)
x_tr, y_tr = to_arrays(split.train)
x_va, y_va = to_arrays(split.val)
x_te, y_te = to_arrays(split.test)
print("train/val/test:", split.sizes)

config = default_model_config(num_classes=len(names), input_side=32,
                              class_names=names)
params = init_params(config)

train_config = TrainConfig(max_epochs=12, patience=4, batch_size=32)
params, log = train(config, params, x_tr, y_tr, x_va, y_va, train_config,
                    progress=lambda e: print(
                        f"  epoch {e.epoch:2d}  train {e.train_loss:.4f}"
                        f"  val {e.val_loss:.4f}  acc {e.val_accuracy:.3f}"))
print("best epoch:", log.best_epoch, " stopped early:", log.stopped_early,
      f" wall {log.wall_time_s:.1f}s")

rep = evaluate(predict(config, params, x_te), y_te, num_classes=len(names))
print(report_text(rep, name="demo"))

save_model("demo_output/demo.cnnm", config, params)
print("wrote demo_output/demo.cnnm")
