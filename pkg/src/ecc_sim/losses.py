"""Composite training objectives: distillation, feature alignment, and the
exemplar-free incremental-learning loss.

Each loss returns both its scalar value and the analytic gradients needed by
the training loops (w.r.t. student logits, and for the alignment term also
w.r.t. the summed tap spikes and the head parameters). Distillation uses the
teacher-as-reference KL with temperature scaling and the temperature^2 factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ecc_sim.nn import DenseLayer, cross_entropy, cross_entropy_grad, init_dense, softmax


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0  # logit distillation
    lambda2: float = 0.5  # feature alignment
    lambda3: float = 1.0  # old-knowledge retention
    kd_temperature: float = 2.0

    def __post_init__(self):
        for v in (self.lambda1, self.lambda2, self.lambda3):
            if not np.isfinite(v) or v < 0:
                raise ValueError("loss weights must be finite and >= 0")
        if self.kd_temperature <= 0:
            raise ValueError("kd_temperature must be positive")


def logit_distill(student_logits: np.ndarray, teacher_logits: np.ndarray,
                  temperature: float) -> float:
    """Temperature-scaled KL(teacher || student) * T^2, mean over the batch."""
    value, _ = _kd_value_and_grad(student_logits, teacher_logits, temperature)
    return value


def _kd_value_and_grad(student_logits, teacher_logits, temperature):
    s = np.atleast_2d(np.asarray(student_logits, dtype=np.float64))
    t = np.atleast_2d(np.asarray(teacher_logits, dtype=np.float64))
    if s.shape != t.shape:
        raise ValueError("student and teacher logits must share a shape")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    p_t = softmax(t / temperature)
    p_s = softmax(s / temperature)
    ratio = np.log(np.maximum(p_t, 1e-300)) - np.log(np.maximum(p_s, 1e-300))
    kl = (p_t * ratio).sum(axis=1)  # p_t -> 0 kills the term, matching 0*log 0 = 0
    kl = np.maximum(kl, 0.0)  # KL is non-negative; clear float rounding noise
    value = float(kl.mean()) * temperature ** 2
    grad = temperature * (p_s - p_t) / s.shape[0]
    return value, grad


@dataclass
class AlignmentHead:
    """Projection + batch standardization mapping summed spike counts into the
    teacher's feature space. Training-only scaffolding; never deployed."""

    projection: DenseLayer
    gamma: np.ndarray  # learnable scale
    beta: np.ndarray  # learnable shift
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @property
    def out_dim(self) -> int:
        return self.projection.out_dim

    def parameters(self) -> list[np.ndarray]:
        return [self.projection.weights, self.projection.bias,
                self.gamma, self.beta]


def build_alignment_head(seed: int, spike_dim: int, feature_dim: int) -> AlignmentHead:
    rng = np.random.default_rng(seed)
    return AlignmentHead(init_dense(rng, spike_dim, feature_dim),
                         gamma=np.ones(feature_dim), beta=np.zeros(feature_dim),
                         running_mean=np.zeros(feature_dim),
                         running_var=np.ones(feature_dim))


@dataclass
class AlignmentGrads:
    d_summed_spikes: np.ndarray
    projection_w: np.ndarray
    projection_b: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray

    def as_list(self) -> list[np.ndarray]:
        return [self.projection_w, self.projection_b, self.gamma, self.beta]


def align_features(summed_spikes: np.ndarray, head: AlignmentHead,
                   ann_features: np.ndarray, training: bool = True):
    """Mean per-row Euclidean distance between projected spike features and the
    (frozen) teacher features. Returns (loss, AlignmentGrads)."""
    s = np.atleast_2d(np.asarray(summed_spikes, dtype=np.float64))
    a = np.atleast_2d(np.asarray(ann_features, dtype=np.float64))
    if s.shape[0] != a.shape[0]:
        raise ValueError("batch sizes differ")
    if head.out_dim != a.shape[1]:
        raise ValueError("head output dim does not match teacher features")
    n = s.shape[0]

    z = s @ head.projection.weights.T + head.projection.bias
    if training:
        mu = z.mean(axis=0)
        var = z.var(axis=0)
        head.running_mean = (1 - head.momentum) * head.running_mean + head.momentum * mu
        head.running_var = (1 - head.momentum) * head.running_var + head.momentum * var
    else:
        mu = head.running_mean
        var = head.running_var
    inv_std = 1.0 / np.sqrt(var + head.eps)
    x_hat = (z - mu) * inv_std
    out = head.gamma * x_hat + head.beta

    diff = out - a
    dist = np.sqrt((diff ** 2).sum(axis=1))
    loss = float(dist.mean())

    # d loss / d out; rows at exactly zero distance contribute no gradient
    safe = np.maximum(dist, 1e-12)[:, None]
    d_out = diff / safe / n

    d_gamma = (d_out * x_hat).sum(axis=0)
    d_beta = d_out.sum(axis=0)
    d_xhat = d_out * head.gamma
    if training:
        # full batch-statistics backward
        d_z = (inv_std / n) * (n * d_xhat - d_xhat.sum(axis=0)
                               - x_hat * (d_xhat * x_hat).sum(axis=0))
    else:
        d_z = d_xhat * inv_std
    d_proj_w = d_z.T @ s
    d_proj_b = d_z.sum(axis=0)
    d_s = d_z @ head.projection.weights
    return loss, AlignmentGrads(d_s, d_proj_w, d_proj_b, d_gamma, d_beta)


@dataclass
class JointLossResult:
    value: float
    ce: float
    kd: float
    align: float
    d_logits: np.ndarray
    align_grads: AlignmentGrads | None


def joint_loss(student_logits: np.ndarray, labels: np.ndarray,
               teacher_logits: np.ndarray, weights: LossWeights,
               alignment: tuple[np.ndarray, AlignmentHead, np.ndarray] | None = None,
               ) -> JointLossResult:
    """Setup-stage objective: CE + lambda1 * KD (+ lambda2 * alignment).

    `alignment` is (summed_tap_spikes, head, teacher_features) and must be
    supplied exactly when lambda2 > 0.
    """
    if weights.lambda2 > 0 and alignment is None:
        raise ValueError("lambda2 > 0 requires alignment inputs")
    s = np.atleast_2d(np.asarray(student_logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))

    ce = cross_entropy(softmax(s), labels)
    d_logits = cross_entropy_grad(s, labels)
    total = ce

    kd = 0.0
    if weights.lambda1 > 0:
        kd, kd_grad = _kd_value_and_grad(s, teacher_logits, weights.kd_temperature)
        total = total + weights.lambda1 * kd
        d_logits = d_logits + weights.lambda1 * kd_grad

    align = 0.0
    align_grads = None
    if weights.lambda2 > 0:
        summed, head, feats = alignment
        align, align_grads = align_features(summed, head, feats, training=True)
        total = total + weights.lambda2 * align
        align_grads = AlignmentGrads(
            weights.lambda2 * align_grads.d_summed_spikes,
            weights.lambda2 * align_grads.projection_w,
            weights.lambda2 * align_grads.projection_b,
            weights.lambda2 * align_grads.gamma,
            weights.lambda2 * align_grads.beta)
    return JointLossResult(float(total), ce, kd, align, d_logits, align_grads)


@dataclass
class LwfLossResult:
    value: float
    new_term: float
    old_term: float
    d_logits: np.ndarray


def lwf_loss(new_logits: np.ndarray, buffer_labels: np.ndarray,
             cloud_logits: np.ndarray, old_model_logits: np.ndarray | None,
             weights: LossWeights) -> LwfLossResult:
    """Update-stage objective: L_new + lambda3 * L_old.

    L_new = CE against the cloud-assigned labels + lambda1 * KD from the cloud
    logits. L_old distills the pre-update snapshot's distribution into the
    old-class slice of the new head.
    """
    s = np.atleast_2d(np.asarray(new_logits, dtype=np.float64))
    if s.shape[0] == 0:
        raise ValueError("empty buffer batch")
    labels = np.atleast_1d(np.asarray(buffer_labels, dtype=np.int64))

    ce = cross_entropy(softmax(s), labels)
    d_logits = cross_entropy_grad(s, labels)
    new_term = ce
    if weights.lambda1 > 0:
        kd, kd_grad = _kd_value_and_grad(s, cloud_logits, weights.kd_temperature)
        new_term = new_term + weights.lambda1 * kd
        d_logits = d_logits + weights.lambda1 * kd_grad

    old_term = 0.0
    total = new_term
    if weights.lambda3 > 0:
        if old_model_logits is None:
            raise ValueError("lambda3 > 0 requires old-model logits")
        old = np.atleast_2d(np.asarray(old_model_logits, dtype=np.float64))
        k_old = old.shape[1]
        old_term, old_grad = _kd_value_and_grad(s[:, :k_old], old,
                                                weights.kd_temperature)
        total = total + weights.lambda3 * old_term
        d_logits = d_logits.copy()
        d_logits[:, :k_old] += weights.lambda3 * old_grad
    return LwfLossResult(float(total), float(new_term), float(old_term), d_logits)
