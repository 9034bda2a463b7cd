"""cleer: joint contrastive + supervised representation learning for
multichannel time series, with a self-contained differentiable kernel set."""

__version__ = "0.1.0"

from .tensor import DiffTensor, no_grad
from .gradcheck import grad_check
from .optim import Adam
from .augment import CropPair, MaskVector, apply_crop, apply_mask, sample_crop_pair, sample_mask
from .data import (Recording, SegmentSet, FoldSplit, load_segments,
                   make_synthetic_dataset, save_segments, segment_recording,
                   stratified_kfold)
from .preprocess import FilterSpec, average_reference, bandpass, notch
from .losses import (LossBreakdown, dcl_loss, hcl_loss, icl_loss, joint_loss,
                     tcl_loss)
from .model import (ClassifierConfig, EncoderConfig, Model, load_checkpoint,
                    save_checkpoint)
from .trainer import (FoldReport, TrainConfig, compare_modes, evaluate,
                      run_skcv, train_step, two_step_baseline)
from .ablation import ChannelReport, export_representations, per_channel_eval
