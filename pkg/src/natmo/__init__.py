"""Natural gradient descent with functional heavy-ball / Nesterov momentum.

Subpackages follow the pipeline: quadrature (empirical measures) -> models
(parametrizations and tangent features) -> losses -> natgrad (Gram systems
and regularized pseudo-inverses) -> optimizers (update rules) -> benchmarks
(the four experiments) -> harness (matrix runner, traces, summaries) ->
oracles (independent verifiers).  The hot evaluation kernel lives in
``natmo.kernels`` with a compiled backend and a NumPy fallback.
"""

from .kernels import backend_name

__version__ = "0.1.0"
__all__ = ["backend_name", "__version__"]
