import numpy as np
import pytest

from convbench import ConvParams


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_params(r=1, s=1, sy=1, sx=1, dy=1, dx=1, pt=0, pl=0, pb=None, pr=None,
                c=1, k=1):
    """Compact ConvParams builder; pb/pr default to pt/pl (symmetric)."""
    return ConvParams(
        kernel_h=r, kernel_w=s, stride_h=sy, stride_w=sx,
        dilation_h=dy, dilation_w=dx,
        pad_top=pt, pad_left=pl,
        pad_bottom=pt if pb is None else pb,
        pad_right=pl if pr is None else pr,
        in_channels=c, out_channels=k,
    )
