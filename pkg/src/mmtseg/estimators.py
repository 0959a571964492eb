"""scikit-learn style front-ends for the segmentation algorithms.

Each estimator follows the clusterer protocol: ``fit(X)`` stores the
H x W segmentation in ``labels_`` and ``fit_predict(X)`` returns it.
``X`` may be channel-first, channel-last or grayscale; see
:func:`mmtseg.validation.check_image`.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, ClusterMixin

from .evaluation import kmeans_segment
from .network import NetworkConfig, count_labels
from .trainer import TrainerConfig, self_train, train
from .validation import check_image


class MutualMeanTeacherSegmenter(ClusterMixin, BaseEstimator):
    """Unsupervised segmentation by two networks teaching each other.

    Two seeded peer networks alternate gradient steps, each supervised by
    the other's EMA (mean) model through Hungarian label alignment, under
    a cross-entropy + total-variation objective.

    Attributes after ``fit``: ``labels_`` (H x W int array), ``n_clusters_``,
    ``collapsed_`` (True if both networks degenerated to one cluster and
    training aborted early), ``metrics_`` (per-step records).
    """

    def __init__(
        self,
        max_iter=1000,
        n_channels=100,
        n_layers=3,
        kernel_size=3,
        learning_rate=0.1,
        momentum=0.9,
        ema_alpha=0.999,
        tv_weight=5.0,
        seed1=0,
        seed2=1,
        output_model="mean1",
        abort_on_collapse=True,
    ):
        self.max_iter = max_iter
        self.n_channels = n_channels
        self.n_layers = n_layers
        self.kernel_size = kernel_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.ema_alpha = ema_alpha
        self.tv_weight = tv_weight
        self.seed1 = seed1
        self.seed2 = seed2
        self.output_model = output_model
        self.abort_on_collapse = abort_on_collapse

    def _trainer_config(self):
        return TrainerConfig(
            iterations=self.max_iter,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            ema_alpha=self.ema_alpha,
            tv_weight=self.tv_weight,
            seed1=self.seed1,
            seed2=self.seed2,
            network=NetworkConfig(
                n_layers=self.n_layers,
                n_channels=self.n_channels,
                kernel_size=self.kernel_size,
            ),
            output_model=self.output_model,
            abort_on_collapse=self.abort_on_collapse,
        )

    def fit(self, X, y=None):
        image = check_image(X)
        result = train(image, self._trainer_config())
        self.labels_ = result.labels
        self.n_clusters_ = count_labels(result.labels)
        self.collapsed_ = result.collapsed
        self.metrics_ = result.metrics
        return self


class SelfTrainingSegmenter(ClusterMixin, BaseEstimator):
    """Single-network ablation: a network trained on its own argmax labels.

    This is the plain differentiable-clustering baseline whose run-to-run
    instability the mutual scheme is meant to fix; kept for comparisons.
    """

    def __init__(
        self,
        max_iter=1000,
        n_channels=100,
        n_layers=3,
        kernel_size=3,
        learning_rate=0.1,
        momentum=0.9,
        tv_weight=5.0,
        random_state=0,
        abort_on_collapse=True,
    ):
        self.max_iter = max_iter
        self.n_channels = n_channels
        self.n_layers = n_layers
        self.kernel_size = kernel_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.tv_weight = tv_weight
        self.random_state = random_state
        self.abort_on_collapse = abort_on_collapse

    def fit(self, X, y=None):
        image = check_image(X)
        config = TrainerConfig(
            iterations=self.max_iter,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            tv_weight=self.tv_weight,
            seed1=self.random_state,
            seed2=self.random_state,
            network=NetworkConfig(
                n_layers=self.n_layers,
                n_channels=self.n_channels,
                kernel_size=self.kernel_size,
            ),
            abort_on_collapse=self.abort_on_collapse,
        )
        result = self_train(image, config)
        self.labels_ = result.labels
        self.n_clusters_ = count_labels(result.labels)
        self.collapsed_ = result.collapsed
        self.metrics_ = result.metrics
        return self


class KMeansSegmenter(ClusterMixin, BaseEstimator):
    """Color-space k-means segmentation (Lloyd's algorithm on RGB)."""

    def __init__(self, n_clusters=8, random_state=0, max_iter=100):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.max_iter = max_iter

    def fit(self, X, y=None):
        image = check_image(X)
        self.labels_ = kmeans_segment(
            image, self.n_clusters, seed=self.random_state, max_iters=self.max_iter
        )
        self.n_clusters_ = count_labels(self.labels_)
        return self
