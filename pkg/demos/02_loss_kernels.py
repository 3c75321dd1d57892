#!/usr/bin/env python3
"""Walkthrough: the four objective losses and their gradient verification.

Each kernel is exercised on a readable micro-batch, then the combined
objective and the finite-difference checker tie everything together.
"""

import numpy as np

from rankfuse import (
    ItmBatch,
    LossKind,
    MaskSpec,
    MlmBatch,
    ScoreMatrix,
    finite_diff_grad_check,
    itc_loss,
    itm_loss,
    mim_loss,
    mlm_loss,
    total_loss,
)

rng = np.random.default_rng(0)

# --- contrastive alignment -------------------------------------------------
# Row i / column i is the matching pair. A crisp diagonal means the loss is
# near zero; a flat matrix pays ~log(N) per direction.
aligned = ScoreMatrix(np.eye(4) * 10.0)
flat = ScoreMatrix(np.zeros((4, 4)))
print("contrastive, aligned batch:", round(itc_loss(aligned, tau=0.07), 6))
print("contrastive, uninformative batch:", round(itc_loss(flat, tau=0.07), 6),
      "(= log 4 =", round(np.log(4), 6), ")")

# --- pair matching -----------------------------------------------------------
# Binary cross-entropy on 'does this image-text pair correspond'.
batch = ItmBatch(labels=[1, 1, 0, 0], probs=[0.95, 0.7, 0.2, 0.45])
print("matching loss:", round(itm_loss(batch), 6))
print("matching loss, confident and right:", itm_loss(ItmBatch([1, 0], [1.0, 0.0])))

# --- masked-token prediction -------------------------------------------------
# One row per masked position over a 5-token vocabulary.
predicted = np.array([
    [0.80, 0.05, 0.05, 0.05, 0.05],   # confident, correct (target 0)
    [0.20, 0.20, 0.20, 0.20, 0.20],   # uniform guess      (target 3)
])
mlm = MlmBatch(predicted, target_index=[0, 3])
print("masked-token loss:", round(mlm_loss(mlm), 6))

# --- masked-image reconstruction ----------------------------------------------
# Two 4x4 images; 40% of the pixels are hidden and must be reconstructed.
original = rng.uniform(0, 1, (2, 4, 4))
mask = MaskSpec(rng.random((2, 4, 4)) < 0.4)
noisy = original + rng.normal(0, 0.1, original.shape)
print("reconstruction loss (masked mean):", round(mim_loss(noisy, original, mask), 6))
print("reconstruction loss (raw L1 sum): ", round(mim_loss(noisy, original, mask, normalize=False), 6))

# --- the combined objective ---------------------------------------------------
report = total_loss(
    itc=itc_loss(aligned, tau=0.07),
    itm=itm_loss(batch),
    mlm=mlm_loss(mlm),
    mim=mim_loss(noisy, original, mask),
)
print(f"total = itc + itm + mlm + {report.alpha} * mim = {report.total:.6f}")

# --- trust, then verify --------------------------------------------------------
# Central finite differences against the analytic gradients; the relative
# error should sit far below 1e-4 for every kernel.
sim = rng.uniform(-1, 1, (4, 4))
checks = {
    "itc": finite_diff_grad_check(LossKind.ITC, (sim, 0.07)),
    "itm": finite_diff_grad_check(LossKind.ITM, batch),
    "mlm": finite_diff_grad_check(LossKind.MLM, mlm),
    "mim": finite_diff_grad_check(LossKind.MIM, (noisy, original, mask)),
}
for name, err in checks.items():
    print(f"gradient check {name}: max relative error {err:.2e}")
