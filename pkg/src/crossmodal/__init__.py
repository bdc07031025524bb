"""Audio-tactile cross-modal experience design toolkit.

Pipeline: model a product's cognitive evaluation structure, detect design
conflicts and cross-modal opportunities, synthesize paired audio-tactile
stimuli, run constant-stimuli sessions (live or simulated), fit logistic
psychometric curves with confidence zones, and invert the fitted model
into design recommendations.
"""

from .design_solver import Recommendation, SolvedLevel, recommend, solve_level
from .kansei_graph import (
    CognitiveStructure,
    Conflict,
    CrossModalOpportunity,
    Edge,
    Layer,
    Modality,
    Node,
    Valence,
    find_conflicts,
    find_opportunities,
    fixture_path,
    load_fixture,
    load_structure,
    parse_structure,
    validate,
)
from .observer_sim import Observer, ObserverModel, respond, run_panel, run_synthetic_session
from .psychometrics import (
    BinomialPoint,
    CollapseRule,
    ConfidenceBand,
    LogisticFit,
    collapse,
    confidence_band,
    fit_logistic,
    odds_ratio,
    outside_band,
    predict,
)
from .session import (
    ExperimentDesign,
    Grade,
    SessionLog,
    Trial,
    experiment1_design,
    experiment2_design,
    make_schedule,
    new_session,
    tally,
)
from .stimulus import (
    RenderedPair,
    SignalSpec,
    StimulusPair,
    experiment1_grid,
    experiment2_grid,
    render_pair,
    synthesize,
    write_wav,
)

__version__ = "0.1.0"
