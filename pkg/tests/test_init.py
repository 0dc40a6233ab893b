import urncut


def test_public_names():
    for name in ("BandedKernel", "ChainParams", "KernelBuildError", "StateDistribution",
                 "build_kernel", "stationary", "NonConvergenceError", "mixing_time"):
        assert hasattr(urncut, name)


def test_version():
    assert urncut.__version__ == "0.1.0"


def test_build_kernel_from_package_root():
    kernel = urncut.build_kernel(urncut.ChainParams(4, 1))
    assert kernel.max_row_deviation <= 1e-12
