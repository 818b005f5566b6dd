"""spinmacro: quantum macroscopicity measures for multi-spin systems."""

from .errors import (FormatError, NumericalFailure, SpinMacroError,
                     ValidationError)
from .spincore import (DensityMatrix, DirectionField, OperatorKind,
                       SystemDescriptor, collective_operator, ghz_state,
                       mixed_ghz, metrology_state, partial_trace, purity,
                       random_density, random_pure, read_msdm, stream_rng,
                       write_msdm)
from .macromeasure import (Convention, MeasureMatrix, MeasureResult, build_V,
                           build_W, dephasing_purity_rate, measure_F,
                           measure_I, optimize_direction, qfi_form,
                           spectral_I, symmetric_measure, trace_form_I)
from .phasespace import (CharacteristicTable, WignerGrid, characteristic_table,
                         clebsch_gordan, irreducible_tensor, iz_quadrature,
                         iz_sum, purity_from_characteristic, wigner_grid,
                         wigner_to_csv)
from .lindblad import (Channel, DickeState, LindbladSpec, Trajectory,
                       dicke_evolve, dicke_ghz, dicke_ground, dicke_embed,
                       dicke_measures, evolve, lindblad_rhs)
from .isingqpt import (CanonicalSkewForm, MajoranaCorrelation, block_rdm,
                       canonical_skew_form, exact_ground_state, g_coefficient,
                       gamma_matrix, ground_state_vector,
                       max_variance_per_particle, scaling_exponent,
                       sweep_block, xx_correlation)

__version__ = "0.1.0"
