"""Label efficiency of the two-stage pipeline.

The input module is trained with pairwise (same class or not) supervision
only.  Full labels are needed just to train the linear output module, and
once the features cluster by class, a single labeled example per class is
enough to place the decision regions.
"""

from modkernel.datasets import DatasetSpec, make_dataset
from modkernel.training import (ArchitectureSpec, TrainConfig, TwoModuleModel,
                                label_efficiency_run, train_input_module)

data = make_dataset(DatasetSpec(kind="gaussian-blobs", n=480, d=8,
                                num_classes=4, seed=13, split_fraction=0.625))
arch = ArchitectureSpec(input_dim=8, hidden_widths=(24,), latent_dim=3,
                        num_classes=4)
cfg = TrainConfig(batch_size=64, lr_schedule=((0.05, 40), (0.01, 20)),
                  momentum=0.9, seed=5, proxy="nmse-neo", loss="xe",
                  trace_every=30)

model = TwoModuleModel(arch, seed=5)
train_input_module(model, data, cfg)

budgets = [4, 8, 16, 64, data.X_train.shape[0]]
rows = label_efficiency_run(model, data, budgets, balanced=True, seed=3,
                            cfg=cfg)
print(f"{'labeled examples':>18s} {'test accuracy':>14s}")
for row in rows:
    print(f"{row['budget']:>18d} {row['test_accuracy']:>14.4f}")
full = rows[-1]["test_accuracy"]
print(f"\none label per class retains "
      f"{rows[0]['test_accuracy'] / full * 100:.1f}% of the full-label accuracy")
