import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprauth.errors import InputError, NumericError
from exprauth.synthdata import (
    Clip,
    FlameSequence,
    RefinementObjective,
    filter_clip,
    forge_clip,
    generate_persona,
    make_pretraining_clips,
    read_corpus,
    refine_coeffs,
    singularize_shape,
    synthesize_clip,
    write_corpus,
)


class TestGeneratePersona:
    def test_deterministic(self):
        a = generate_persona(7)
        b = generate_persona(7)
        assert np.array_equal(a.response, b.response)
        assert np.array_equal(a.bias, b.bias)
        assert a.smoothing == b.smoothing

    def test_distinct_seeds_distinct_mappings(self):
        personas = [generate_persona(i) for i in range(8)]
        for i in range(8):
            for j in range(i + 1, 8):
                d = np.linalg.norm(personas[i].response - personas[j].response)
                assert d > 1.0, (i, j, d)

    def test_shapes(self):
        p = generate_persona(0, audio_dim=16)
        assert p.response.shape == (16, 53)
        assert p.bias.shape == (53,)
        assert 0.0 <= p.smoothing < 1.0


class TestClips:
    def test_synthesize_deterministic(self):
        p = generate_persona(3)
        a = synthesize_clip(p, 42, L=50)
        b = synthesize_clip(p, 42, L=50)
        assert np.array_equal(a.audio, b.audio)
        assert np.array_equal(a.expressions, b.expressions)
        assert not a.is_fake
        assert a.persona_id == a.actor_id == p.persona_id

    def test_shapes(self):
        p = generate_persona(1, audio_dim=8)
        c = synthesize_clip(p, 0, L=30)
        assert c.audio.shape == (30, 8)
        assert c.expressions.shape == (30, 53)

    def test_forge_shares_target_audio(self):
        target = generate_persona(0)
        actor = generate_persona(1)
        genuine = synthesize_clip(target, 9, L=20)
        fake = forge_clip(target, actor, 9, L=20)
        assert np.array_equal(fake.audio, genuine.audio)
        assert not np.array_equal(fake.expressions, genuine.expressions)
        assert fake.is_fake
        assert fake.persona_id == target.persona_id
        assert fake.actor_id == actor.persona_id

    def test_self_forgery_is_genuine(self):
        p = generate_persona(4)
        self_forge = forge_clip(p, p, 11, L=20)
        genuine = synthesize_clip(p, 11, L=20)
        assert np.array_equal(self_forge.expressions, genuine.expressions)
        assert not self_forge.is_fake

    def test_different_audio_seeds_differ(self):
        p = generate_persona(5)
        a = synthesize_clip(p, 1, L=20)
        b = synthesize_clip(p, 2, L=20)
        assert not np.array_equal(a.audio, b.audio)

    def test_identity_separates_expressions(self):
        # same audio rendered by two personas should be farther apart than
        # repeated renders of the same persona are from their noiseless mean
        t, a = generate_persona(0), generate_persona(1)
        genuine = synthesize_clip(t, 3, L=100)
        fake = forge_clip(t, a, 3, L=100)
        gap = np.linalg.norm(genuine.expressions - fake.expressions)
        noise_scale = t.noise_level * np.sqrt(genuine.expressions.size)
        assert gap > 5 * noise_scale

    def test_invalid_length(self):
        with pytest.raises(InputError):
            synthesize_clip(generate_persona(0), 0, L=0)


class TestCuration:
    def test_singularize_shape(self):
        shapes = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert np.allclose(singularize_shape(shapes), [3.0, 4.0])

    def test_singularize_empty(self):
        with pytest.raises(InputError):
            singularize_shape(np.zeros((0, 5)))

    def test_refine_quadratic_objective(self):
        # minimize ||params - target||^2 over all blocks; refinement should
        # strictly reduce the objective and keep the shape shared
        rng = np.random.default_rng(0)
        target = FlameSequence(shape=rng.normal(size=4),
                               expression=rng.normal(size=(5, 50)),
                               pose=rng.normal(size=(5, 6)))
        init = FlameSequence(shape=np.zeros(4),
                             expression=np.zeros((5, 50)),
                             pose=np.zeros((5, 6)))

        def fn(p):
            gs = FlameSequence(shape=2 * (p.shape - target.shape),
                               expression=2 * (p.expression - target.expression),
                               pose=2 * (p.pose - target.pose))
            value = (np.sum((p.shape - target.shape) ** 2)
                     + np.sum((p.expression - target.expression) ** 2)
                     + np.sum((p.pose - target.pose) ** 2))
            return value, gs

        obj = RefinementObjective(fn=fn, name="quadratic")
        out = refine_coeffs(init, obj, iters=50, lr=1e-2)
        assert out.shape_is_shared()
        assert fn(out)[0] < fn(init)[0]

    def test_refine_requires_shared_shape(self):
        seq = FlameSequence(shape=np.zeros((5, 4)),
                            expression=np.zeros((5, 50)),
                            pose=np.zeros((5, 6)))
        obj = RefinementObjective(fn=lambda p: (0.0, p))
        with pytest.raises(InputError):
            refine_coeffs(seq, obj)

    def test_refine_non_finite_objective(self):
        seq = FlameSequence(shape=np.zeros(4),
                            expression=np.zeros((5, 50)),
                            pose=np.zeros((5, 6)))
        obj = RefinementObjective(fn=lambda p: (float("nan"), p))
        with pytest.raises(NumericError):
            refine_coeffs(seq, obj, iters=1)

    @pytest.mark.parametrize("duration,quality,keep", [
        (8.0, 41.0, True),
        (7.99, 90.0, False),     # too short
        (30.0, 40.0, False),     # quality must strictly exceed the bar
        (8.0, 40.01, True),
        (0.0, 0.0, False),
    ])
    def test_filter_clip(self, duration, quality, keep):
        assert filter_clip(duration, quality) is keep

    @given(d=st.floats(0, 100), q=st.floats(0, 100))
    @settings(max_examples=50, deadline=None)
    def test_filter_clip_monotone(self, d, q):
        # passing a clip implies any longer/higher-quality clip passes
        if filter_clip(d, q):
            assert filter_clip(d + 1, q)
            assert filter_clip(d, q + 1)


class TestCorpusIO:
    def test_roundtrip(self, tmp_path):
        p = generate_persona(0, audio_dim=4)
        a = generate_persona(1, audio_dim=4)
        clips = [synthesize_clip(p, i, L=10) for i in range(3)]
        clips.append(forge_clip(p, a, 99, L=10))
        n = write_corpus(clips, str(tmp_path))
        assert n == 4
        loaded = read_corpus(str(tmp_path))
        assert [c.clip_id for c in loaded] == [c.clip_id for c in clips]
        for orig, back in zip(clips, loaded):
            assert np.array_equal(back.audio, orig.audio.astype(np.float32))
            assert np.array_equal(back.expressions,
                                  orig.expressions.astype(np.float32))
            assert back.is_fake == orig.is_fake
            assert back.persona_id == orig.persona_id
            assert back.actor_id == orig.actor_id

    def test_byte_deterministic(self, tmp_path):
        p = generate_persona(2, audio_dim=4)
        clips = [synthesize_clip(p, i, L=8) for i in range(2)]
        d1, d2 = tmp_path / "a", tmp_path / "b"
        write_corpus(clips, str(d1))
        write_corpus(clips, str(d2))
        for f in sorted(x.name for x in d1.iterdir()):
            assert (d1 / f).read_bytes() == (d2 / f).read_bytes(), f

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(InputError):
            read_corpus(str(tmp_path))


class TestPretrainingCorpus:
    def test_counts_and_determinism(self):
        personas, clips = make_pretraining_clips(3, 4, L=10, audio_dim=4)
        assert len(personas) == 3
        assert len(clips) == 12
        _, again = make_pretraining_clips(3, 4, L=10, audio_dim=4)
        for c1, c2 in zip(clips, again):
            assert np.array_equal(c1.expressions, c2.expressions)

    def test_all_clip_ids_unique(self):
        _, clips = make_pretraining_clips(4, 5, L=6, audio_dim=4)
        ids = [c.clip_id for c in clips]
        assert len(set(ids)) == len(ids)

    def test_base_seed_shifts_everything(self):
        _, a = make_pretraining_clips(2, 2, L=6, audio_dim=4, base_seed=0)
        _, b = make_pretraining_clips(2, 2, L=6, audio_dim=4, base_seed=50)
        assert not np.array_equal(a[0].expressions, b[0].expressions)
