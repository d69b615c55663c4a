"""A tour of the reverse-mode autodiff core.

Builds a tiny computation, walks the backward pass, checks a gradient
against central finite differences, and runs a few SGD+momentum steps.
"""

import numpy as np

import modkernel.autodiff as ad

rng = np.random.default_rng(0)

# ---- forward/backward on a small expression --------------------------------
x = ad.constant(rng.standard_normal((4, 3)))
W = ad.Tensor(rng.standard_normal((3, 2)) * 0.5, requires_grad=True)
b = ad.Tensor(np.zeros(2), requires_grad=True)

out = ad.unit_normalize(ad.tanh(ad.affine(x, W, b)))
loss = ad.tensor_sum(ad.square(out))
ad.backward(loss)

print("loss:", loss.item())
print("dloss/dW:\n", W.grad)

# ---- gradient check ---------------------------------------------------------
def value(w_arr):
    out = ad.unit_normalize(ad.tanh(ad.affine(x, ad.Tensor(w_arr), b)))
    return ad.tensor_sum(ad.square(out)).item()

step = 1e-5
fd = np.zeros_like(W.data)
for i in range(W.data.size):
    bump = np.zeros(W.data.size)
    bump[i] = step
    hi = value(W.data + bump.reshape(W.data.shape))
    lo = value(W.data - bump.reshape(W.data.shape))
    fd.ravel()[i] = (hi - lo) / (2 * step)
print("max |analytic - finite difference|:", np.abs(W.grad - fd).max())

# ---- a few optimizer steps --------------------------------------------------
# pull every normalized feature row onto a common target direction
target = ad.constant(np.tile([1.0, 0.0], (4, 1)))
opt = ad.SgdMomentum([W, b], learning_rate=0.05, momentum=0.9)
for step_no in range(8):
    out = ad.unit_normalize(ad.tanh(ad.affine(x, W, b)))
    loss = ad.tensor_sum(ad.square(out - target))
    opt.zero_grad()
    ad.backward(loss)
    opt.step()
    print(f"step {step_no}: loss {loss.item():.6f}")
