"""scikit-learn style wrappers so the pipeline composes with the wider
ecosystem: an unpaired domain translator (fit/transform) and a vessel
segmenter (fit/predict/predict_proba)."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .edges import CannyParams
from .gan import GanConfig, train_edgecyclegan, translate
from .image import Image, SegMask
from .segmentation import SegConfig, predict_mask, predict_prob, train_segmentor


def _as_images(X) -> list[Image]:
    return [x if isinstance(x, Image) else Image(np.asarray(x)) for x in X]


class DomainTranslator(BaseEstimator, TransformerMixin):
    """Unpaired image-to-image translator with cycle-consistency and an
    optional edge-preservation penalty.

    fit(X, y) treats X as source-domain images and y as (unpaired)
    target-domain images. transform(X) maps source images into the target
    domain; inverse_transform maps the other way.
    """

    def __init__(self, lambda_cyc=10.0, gamma_edge=3.0, epochs=200, batch_size=1,
                 learning_rate=2e-4, seed=0, sigma=1.0, low=0.1, high=0.2,
                 soft_temperature=50.0, use_least_squares_adv=True, pool_size=50,
                 gen_base_filters=64, gen_residual_blocks=None,
                 disc_base_filters=64, disc_layers=3):
        self.lambda_cyc = lambda_cyc
        self.gamma_edge = gamma_edge
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.sigma = sigma
        self.low = low
        self.high = high
        self.soft_temperature = soft_temperature
        self.use_least_squares_adv = use_least_squares_adv
        self.pool_size = pool_size
        self.gen_base_filters = gen_base_filters
        self.gen_residual_blocks = gen_residual_blocks
        self.disc_base_filters = disc_base_filters
        self.disc_layers = disc_layers

    def _config(self) -> GanConfig:
        return GanConfig(
            lambda_cyc=self.lambda_cyc, gamma_edge=self.gamma_edge,
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.seed,
            canny=CannyParams(self.sigma, self.low, self.high, self.soft_temperature),
            use_least_squares_adv=self.use_least_squares_adv,
            pool_size=self.pool_size, gen_base_filters=self.gen_base_filters,
            gen_residual_blocks=self.gen_residual_blocks,
            disc_base_filters=self.disc_base_filters, disc_layers=self.disc_layers)

    def fit(self, X, y):
        if y is None:
            raise ValueError("fit needs target-domain images as y")
        result = train_edgecyclegan(_as_images(X), _as_images(y), self._config())
        self.generator_ = result.G
        self.inverse_generator_ = result.F
        self.history_ = result.history
        return self

    def transform(self, X) -> list[Image]:
        self._check_fitted()
        return translate(self.generator_, _as_images(X))

    def inverse_transform(self, X) -> list[Image]:
        self._check_fitted()
        return translate(self.inverse_generator_, _as_images(X))

    def _check_fitted(self):
        if not hasattr(self, "generator_"):
            raise NotFittedError("DomainTranslator is not fitted yet")


class VesselSegmenter(BaseEstimator):
    """Pixel-wise binary segmenter backed by a U-Net.

    An optional fitted DomainTranslator passed as ``translator`` maps the
    training images into the target domain first (the translator itself
    stays frozen)."""

    def __init__(self, epochs=100, batch_size=4, learning_rate=1e-4, seed=0,
                 threshold=0.5, class_weights=None, unet_base_filters=64,
                 unet_depth=4, translator=None):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.threshold = threshold
        self.class_weights = class_weights
        self.unet_base_filters = unet_base_filters
        self.unet_depth = unet_depth
        self.translator = translator

    def fit(self, X, y):
        images = _as_images(X)
        labels = [m if isinstance(m, SegMask) else SegMask(np.asarray(m)) for m in y]
        cfg = SegConfig(epochs=self.epochs, batch_size=self.batch_size,
                        learning_rate=self.learning_rate, seed=self.seed,
                        class_weights=self.class_weights, threshold=self.threshold,
                        unet_base_filters=self.unet_base_filters,
                        unet_depth=self.unet_depth)
        gen = self.translator.generator_ if self.translator is not None else None
        self.unet_, self.history_ = train_segmentor(gen, images, labels, cfg)
        return self

    def predict(self, X) -> list[SegMask]:
        self._check_fitted()
        return [predict_mask(self.unet_, img, self.threshold) for img in _as_images(X)]

    def predict_proba(self, X):
        self._check_fitted()
        return [predict_prob(self.unet_, img) for img in _as_images(X)]

    def score(self, X, y) -> float:
        """Mean DICE over the given images and reference masks."""
        from .metrics import dice_score

        labels = [m if isinstance(m, SegMask) else SegMask(np.asarray(m)) for m in y]
        preds = self.predict(X)
        return float(np.mean([dice_score(p, g) for p, g in zip(preds, labels)]))

    def _check_fitted(self):
        if not hasattr(self, "unet_"):
            raise NotFittedError("VesselSegmenter is not fitted yet")
