"""rawisp: a self-contained neural ISP for low-light raw Bayer data.

Converts mosaiced sensor data into detector-ready RGB via a minimal
pipeline (level normalization, packing, green averaging, color space
transformation) followed by two regressed global color transforms and a
shallow residual enhancement network, trainable end-to-end under a frozen
task-guidance loss.
"""

from .tensor import Tensor, grad_check
from .pipeline import (BayerFrame, normalize_levels, pack_bayer, unpack_bayer,
                       average_greens, apply_cst, resize_keep_aspect,
                       preprocess)
from .color import (WbGains, CcMatrix, ParamNet, make_convwb, make_convcc,
                    convwb_forward, convcc_forward, apply_wb, apply_cc)
from .enhance import EnhanceNet, enhance_forward
from .model import IspModel
from .losses import (FocalParams, LossWeights, GuidanceModel,
                     ToyDetectorGuidance, gray_world_loss, focal_loss,
                     smooth_l1, total_loss)
from .trainer import Adam, AugmentConfig, TrainConfig, train, \
    augment_brightness_contrast
from .metrics import (Box, Detection, AnnotationSet, DetectionSet, iou,
                      match_and_score, average_precision, evaluate)
from .graw import encode_graw, decode_graw, read_graw, write_graw
from .imageio import export_image, save_weights, load_weights

__version__ = "0.1.0"
