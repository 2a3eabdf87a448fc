"""biriccilab: a numerical workbench for weighted bi-Ricci curvature.

Subpackages by role:

* :mod:`biriccilab.charts` — coordinate charts and all pointwise curvature.
* :mod:`biriccilab.conformal` — conformal factors, the conformal Ricci
  tensor, and transformation-law residual checks.
* :mod:`biriccilab.geodesics` — geodesic integration (base and conformal),
  sampling-based diameter estimation, stability-inequality quadrature.
* :mod:`biriccilab.bounds` — every closed-form diameter/size bound and the
  admissibility windows.
* :mod:`biriccilab.stability` — minimal submanifolds, the Jacobi operator,
  Dirichlet eigenpairs, and the Gauss-equation identities.
* :mod:`biriccilab.neck` — the certified conformal neck construction.
* :mod:`biriccilab.cli` — scans, manifests, and the ``blab`` command line.
"""

from .charts import (Chart, CurvatureBundle, TangentFrame, bi_ricci,
                     curvature_bundle, field_hessian, field_laplacian,
                     harmonic_bi_ricci, k_sigma, sectional)
from .conformal import (ConformalData, conformal_metric, conformal_ricci,
                        single_factor, verify_2_6, verify_ricci_law,
                        verify_scalar_law, verify_yamabe_trace)
from .bounds import BoundSpec, bound_value, primed_bound, prop1_epsilon_threshold
from .geodesics import (GeodesicPath, estimate_diameter, integrate_conformal_geodesic,
                        integrate_geodesic, lemma1_check)
from .neck import (NeckProfile, build_profile, certify_neck, cutoff_beta,
                   interpolate_to_cylinder, neck_metric, psi_solution)
from .stability import (BoxDomain, EigenResult, Hypersurface, RadialCapDomain,
                        first_eigenpair, jacobi_operator, lemma3_conformal_ricci,
                        lemma4_check, lemma9_lower_bound, second_fundamental_form)

__version__ = "0.1.0"

__all__ = [
    "Chart", "CurvatureBundle", "TangentFrame", "bi_ricci", "curvature_bundle",
    "field_hessian", "field_laplacian", "harmonic_bi_ricci", "k_sigma", "sectional",
    "ConformalData", "conformal_metric", "conformal_ricci", "single_factor",
    "verify_2_6", "verify_ricci_law", "verify_scalar_law", "verify_yamabe_trace",
    "BoundSpec", "bound_value", "primed_bound", "prop1_epsilon_threshold",
    "GeodesicPath", "estimate_diameter", "integrate_conformal_geodesic",
    "integrate_geodesic", "lemma1_check",
    "NeckProfile", "build_profile", "certify_neck", "cutoff_beta",
    "interpolate_to_cylinder", "neck_metric", "psi_solution",
    "BoxDomain", "EigenResult", "Hypersurface", "RadialCapDomain",
    "first_eigenpair", "jacobi_operator", "lemma3_conformal_ricci",
    "lemma4_check", "lemma9_lower_bound", "second_fundamental_form",
    "__version__",
]
