"""graspgauge: a deterministic benchmark harness that quantifies how 6D
pose errors and mesh inaccuracies propagate to parallel-jaw grasp success.
"""

from .aggregate import OutcomeTally, SuccessCurve, s_est, s_gen, \
    success_curve, tally
from .degrade import DegradeParams, degrade_mesh
from .gripper import GripperModel, GripperPose, finger_boxes, \
    load_gripper_registry
from .mesh import (SurfaceSample, TriMesh, box_overlap, chamfer_distance,
                   closest_point, load_mesh, make_mesh, ray_cast,
                   sample_surface)
from .metrics import (CameraIntrinsics, PoseErrorVector, SymmetrySet,
                      add_metric, adi_metric, error_vector, mspd_metric,
                      mssd_metric, translation_rotation_error)
from .oracle import (GraspOutcome, OutcomeCategory, SimParams, TrialRecord,
                     evaluate_grasp, object_mass_properties)
from .runner import (ExperimentCondition, ExperimentConfig, ObjectSpec,
                     ingest_bop_poses, load_config, run_condition, run_trial)
from .sampler import (GraspCandidate, GraspLibrary, build_library,
                      load_library, sample_antipodal, save_library)
from .se3 import (PosePair, RigidTransform, compose, gripper_target_est,
                  gripper_target_gt, invert, perturb_pose)

__version__ = "0.1.0"
