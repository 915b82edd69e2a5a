import os
import subprocess
import sys

import ordview

SCRIPT = """
import numpy as np
from ordview import backend_name
from ordview.model import method_config, predict_proba_batch, train

rng = np.random.default_rng(0)
x = rng.normal(size=(60, 5))
y = np.clip((x[:, 0] * 1.5 + rng.normal(size=60) * 0.3 + 1.5).astype(int), 0, 3)
y = y.astype(np.int64)
cfg = method_config("clm_slace", 4, None, seed=7, epochs=40,
                    backbone="one_hidden", hidden_width=6)
model = train(cfg, x, y)
probs = predict_proba_batch(model, x)
print(backend_name())
print(repr(float(model.epoch_losses[-1])))
print(repr(float(probs.sum())))
print(repr(float(probs[3, 2])))
"""


def run_with_backend(flag):
    env = dict(os.environ, ORDVIEW_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", SCRIPT], capture_output=True, text=True, env=env,
        check=True,
    )
    return out.stdout.strip().splitlines()


class TestBackendSelection:
    def test_flag_exposed(self):
        assert ordview.backend_name() in ("numba", "numpy")
        assert isinstance(ordview.NUMBA_ENABLED, bool)

    def test_backends_bitwise_identical(self):
        numba_lines = run_with_backend("1")
        numpy_lines = run_with_backend("0")
        assert numba_lines[0] == "numba"
        assert numpy_lines[0] == "numpy"
        # identical floating point results from both kernel implementations
        assert numba_lines[1:] == numpy_lines[1:]
