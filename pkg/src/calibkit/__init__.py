"""calibkit: measure classifier miscalibration and fix it after the fact.

The package takes raw logits plus labels, reports reliability metrics
(ECE, MCE, NLL, entropy, error rate), and fits the standard post-hoc
calibration maps: histogram binning, isotonic regression, Bayesian
binning over schemes, logistic scaling, and the temperature / vector /
matrix softmax rescalings, with a one-vs-all wrapper for using binary
methods on multiclass data.
"""

from .binary import (
    BBQModel,
    BBQScheme,
    HistogramBinningModel,
    IsotonicModel,
    PlattModel,
    apply_binary,
    fit_bbq,
    fit_histogram,
    fit_isotonic,
    fit_platt,
)
from .dataset import (
    BinaryCalibrationSet,
    LogitDataset,
    Prediction,
    ProbVector,
    load_logit_matrix,
    load_logits,
    predict,
    save_logits,
    softmax,
    to_one_vs_all,
)
from .errors import (
    BoundaryOptimumError,
    CalibrationError,
    DataFormatError,
    DataIOError,
    DegenerateLabelsError,
    NonConvergenceError,
    NumericalError,
    OverfitWarning,
    ValidationError,
    ZeroMassError,
)
from .metrics import (
    MetricsReport,
    ReliabilityHistogram,
    build_histogram,
    ece,
    evaluate,
    evaluate_probs,
    histogram_to_csv,
    mce,
    mean_entropy,
    nll,
    report_to_json,
)
from .multiclass import (
    AffineScalingModel,
    CalibratedOutput,
    OneVsAllModel,
    TemperatureModel,
    apply_affine,
    apply_one_vs_all,
    apply_temperature,
    calibrated_probs,
    fit_affine,
    fit_one_vs_all,
    fit_temperature,
)
from .optimize import GradMinResult, ScalarMinResult, check_gradient, minimize_grad, minimize_scalar
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .synth import SplitMix64, SynthSpec, gen_binary, gen_sharpened

__version__ = "0.1.0"
