"""Edge-preserving unpaired domain adaptation for vessel segmentation.

Pipeline: unpaired image translation with cycle-consistency and an
edge-preservation loss, then supervised segmentor training on translated
source images, with deterministic synthetic experiments and a CLI.
"""

from .data import (
    AugmentSpec,
    DomainStyle,
    FundusDataset,
    SynthSpec,
    ingest_dataset,
    make_patches,
    synth_fundus,
    two_domain_synth,
)
from .edges import (
    CannyParams,
    EdgeMap,
    SoftEdgeMap,
    canny_edges,
    edge_f_measure,
    soft_edges,
)
from .estimators import DomainTranslator, VesselSegmenter
from .experiments import (
    ExperimentSpec,
    compare_report,
    edge_fidelity_report,
    run_adapted,
    run_baseline,
)
from .gan import (
    GanConfig,
    LossBreakdown,
    adversarial_loss,
    cycle_loss,
    edge_loss,
    total_objective,
    train_edgecyclegan,
    translate,
)
from .image import Image, ProbMap, SegMask, extract_patch, resize, to_grayscale
from .metrics import MetricsReport, dice_score, precision_recall
from .networks import (
    DiscriminatorSpec,
    GeneratorSpec,
    ModelBundle,
    UNetSpec,
    build_discriminator,
    build_generator,
    build_unet,
    load_bundle,
    save_bundle,
)
from .segmentation import SegConfig, predict_mask, seg_loss, train_segmentor

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
