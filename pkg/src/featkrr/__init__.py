"""Compositional kernel ridge regression with learned feature weights.

Submodules:

* ``kernels``    mixture-generated l1 and radial translation-invariant kernels
* ``ridge``      exact KRR on the empirical measure
* ``variation``  analytic directional derivatives and stationarity certificates
* ``proxy``      Monte-Carlo feature-relevance proxy and its quadrature oracle
* ``optimizer``  projected nonsmooth descent over the weights
* ``scenarios``  synthetic ANOVA scenarios with known relevant features
* ``suites``     registered verification suites
* ``reports``    experiment configs, CSV/JSONL emission, CLI command bodies
* ``figures``    matplotlib renderings of report outputs

Submodule attributes are resolved lazily so that importing the package stays
cheap and side-effect free (the CLI relies on this to configure BLAS threading
before numpy is loaded).
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "kernels",
    "ridge",
    "variation",
    "proxy",
    "optimizer",
    "scenarios",
    "suites",
    "reports",
    "figures",
    "cli",
)

# name -> submodule holding it, for flat re-exports
_EXPORTS = {
    "KernelSpec": "kernels",
    "MixtureMeasure": "kernels",
    "UnsupportedFamily": "kernels",
    "psi": "kernels",
    "psi_prime": "kernels",
    "kernel_eval": "kernels",
    "dkernel_directional": "kernels",
    "w_coeff": "kernels",
    "spectral_density": "kernels",
    "SampleSet": "ridge",
    "RidgeFit": "ridge",
    "krr_fit": "ridge",
    "predict": "ridge",
    "objective_value": "ridge",
    "DirectionalReport": "variation",
    "directional_derivative": "variation",
    "coordinate_decomposition": "variation",
    "stationarity_certificate": "variation",
    "finite_difference_check": "variation",
    "noise_descent_direction": "variation",
    "ProxyEstimate": "proxy",
    "sample_spectral": "proxy",
    "proxy_residual_weighted": "proxy",
    "proxy_anova": "proxy",
    "cnd_quadrature_oracle": "proxy",
    "decomposition_gap": "proxy",
    "OptimizerConfig": "optimizer",
    "OptimizerTrace": "optimizer",
    "optimize": "optimizer",
    "monotone_guard": "optimizer",
    "multistart": "optimizer",
    "ScenarioSpec": "scenarios",
    "EffectTerm": "scenarios",
    "SupportMetrics": "scenarios",
    "generate": "scenarios",
    "anova_check": "scenarios",
    "support_metrics": "scenarios",
}

__all__ = sorted(set(_SUBMODULES) | set(_EXPORTS))


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
