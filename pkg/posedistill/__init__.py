"""
posedistill: 3D-augmented contrastive knowledge distillation for
category-agnostic object pose estimation, at desk scale.

A multi-modal teacher (depth image + canonical point cloud) is trained with a
contrastive bridge module; its knowledge is then distilled into an image-only
student. Everything runs on a small numpy autodiff core over procedurally
generated primitives.
"""

__version__ = "0.1.0"
