import subprocess
import sys

import numpy as np
import pytest

from artifact import kernels
from artifact.scenarios import random_problem

BACKENDS = kernels.available_backends()


def run_chain(backend, robot, scene, q):
    prev = kernels.use_backend(backend)
    try:
        return kernels.chain_collision(robot, scene, q, 0.05, 5000.0)
    finally:
        kernels.use_backend(prev)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_chain_collision_backends_agree():
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = random_problem(rng, int(rng.integers(2, 8)), int(rng.integers(1, 6)))
        q = np.linspace(p.start, p.goal_config, 16) + rng.normal(0, 0.3, (16, p.robot.dof))
        a = run_chain("compiled", p.robot, p.scene, q)
        b = run_chain("python", p.robot, p.scene, q)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-10)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("gpu")
    assert kernels.BACKEND in BACKENDS


def test_python_fallback_when_extension_missing():
    code = (
        "import sys\n"
        "class Block:\n"
        "    def find_spec(self, name, path=None, target=None):\n"
        "        if name == 'artifact._ckernels':\n"
        "            raise ImportError('blocked')\n"
        "sys.meta_path.insert(0, Block())\n"
        "from artifact import kernels\n"
        "print(kernels.BACKEND, kernels.available_backends())\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    assert out.strip() == "python ['python']"
