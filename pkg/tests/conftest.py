import numpy as np
import pytest

from spdelab.config import build_model, default_config
from spdelab.grid import build_mesh
from spdelab.model import ConvectionModel, FluxModel, JumpModel, LevyMeasureSpec, ModelSpec, WienerDiffusionModel


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def model(cfg):
    return build_model(cfg)


@pytest.fixture(scope="session")
def mesh():
    return build_mesh(63)


def make_model(mesh, p=4.0, u0=None, sigma=0.5, lambda_star=0.3, g0=0.5, rate=2.0, kind="plaplace", conv_b=0.5, conv_mode="saturated", amp_x=0.3, amp_lambda=0.4, eps_reg=1e-8, diffusion_variant="linear"):
    if u0 is None:
        u0 = 0.5 * np.sin(np.pi * (mesh.nodes - mesh.a) / mesh.length)
    return ModelSpec(
        mesh,
        FluxModel(p=p, amp_x=amp_x, amp_lambda=amp_lambda, eps_reg=eps_reg, kind=kind),
        ConvectionModel(mode=conv_mode, b=conv_b),
        WienerDiffusionModel(sigma=sigma, variant=diffusion_variant),
        JumpModel(lambda_star=lambda_star, g0=g0, levy=LevyMeasureSpec(rate=rate)),
        u0,
    )


def oracle_model(mesh, u0=None):
    return make_model(mesh, p=2.0, u0=u0, kind="oracle", conv_b=0.0, conv_mode="linear", amp_x=0.0, amp_lambda=0.0, eps_reg=0.0)
