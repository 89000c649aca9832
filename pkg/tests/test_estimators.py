import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from edgeadapt.data import DomainStyle, SynthSpec, synth_fundus
from edgeadapt.estimators import DomainTranslator, VesselSegmenter
from edgeadapt.image import Image, SegMask


def domains():
    style_a = DomainStyle(background=0.9, contrast=0.6, noise_std=0.01)
    style_b = DomainStyle(background=0.5, contrast=0.25, noise_std=0.01)
    a = synth_fundus(SynthSpec(count=4, image_size=32, style=style_a, seed=0))
    b = synth_fundus(SynthSpec(count=4, image_size=32, style=style_b, seed=50))
    return a, b


TRANSLATOR_KW = dict(epochs=1, batch_size=2, pool_size=0, gen_base_filters=8,
                     gen_residual_blocks=2, disc_base_filters=8, disc_layers=2, seed=0)
SEGMENTER_KW = dict(epochs=2, batch_size=2, unet_base_filters=8, unet_depth=2, seed=0)


class TestDomainTranslator:
    def test_get_params_and_clone(self):
        t = DomainTranslator(**TRANSLATOR_KW)
        params = t.get_params()
        assert params["epochs"] == 1
        assert clone(t).get_params() == params

    def test_unfitted_transform_raises(self):
        with pytest.raises(NotFittedError):
            DomainTranslator().transform([])

    def test_fit_transform_roundtrip(self):
        a, b = domains()
        t = DomainTranslator(**TRANSLATOR_KW).fit(a.images, b.images)
        outs = t.transform(a.images[:2])
        assert len(outs) == 2
        assert all(isinstance(o, Image) for o in outs)
        backs = t.inverse_transform(outs)
        assert backs[0].data.shape == a.images[0].data.shape
        assert len(t.history_) == 1

    def test_accepts_raw_arrays(self):
        a, b = domains()
        t = DomainTranslator(**TRANSLATOR_KW)
        t.fit([im.data for im in a.images], [im.data for im in b.images])
        out = t.transform([a.images[0].data])
        assert isinstance(out[0], Image)


class TestVesselSegmenter:
    def test_fit_predict(self):
        a, _ = domains()
        seg = VesselSegmenter(**SEGMENTER_KW).fit(a.images, a.labels)
        preds = seg.predict(a.images[:2])
        assert all(isinstance(p, SegMask) for p in preds)
        probs = seg.predict_proba(a.images[:1])
        assert probs[0].data.shape == (32, 32, 2)
        assert 0.0 <= seg.score(a.images[:2], a.labels[:2]) <= 1.0

    def test_with_translator(self):
        a, b = domains()
        t = DomainTranslator(**TRANSLATOR_KW).fit(a.images, b.images)
        before = t.generator_.state_bytes()
        seg = VesselSegmenter(translator=t, **SEGMENTER_KW).fit(a.images, a.labels)
        assert t.generator_.state_bytes() == before  # translator stays frozen
        assert seg.predict(b.images[:1])[0].data.shape == (32, 32)

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            VesselSegmenter().predict([])

    def test_params_roundtrip(self):
        seg = VesselSegmenter(threshold=0.3)
        assert clone(seg).get_params()["threshold"] == 0.3
