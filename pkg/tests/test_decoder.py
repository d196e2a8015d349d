import numpy as np
import pytest

from docevent.autodiff import Tensor, zeros
from docevent.corpus import EventRecord, EventSchema, EventType
from docevent.decoder import EntityRep, RecordDecoder, group_entities, total_loss
from docevent.encoder import MentionRep
from docevent.layers import Parameter

from conftest import finite_difference_check


def mention(vec, surface, sent=0):
    return MentionRep(vector=Tensor(np.asarray(vec, dtype=float)), sentence_index=sent,
                      start=0, end=1, surface=surface)


@pytest.fixture
def schema1():
    return EventSchema(types=(EventType("evt", ("r1", "r2")),))


def make_decoder(schema, d=4, seed=0, **kw):
    return RecordDecoder(np.random.default_rng(seed), schema, d, **kw)


class FirstCoordHead:
    """Stub argument head: logit is the first coordinate of its input row."""

    def __call__(self, x):
        return x[:, 0:1]


def rig(decoder):
    decoder.arg = FirstCoordHead()
    return decoder


class TestGroupEntities:
    def test_same_surface_merges_with_maxpool(self):
        ments = [mention([1.0, 0.0], "acme"), mention([0.0, 2.0], "acme", sent=1)]
        ents = group_entities(ments)
        assert len(ents) == 1
        assert np.allclose(ents[0].vector.data, [1.0, 2.0])

    def test_first_occurrence_order(self):
        ments = [mention([0.0, 0.0], "b"), mention([0.0, 0.0], "a"),
                 mention([0.0, 0.0], "b")]
        assert [e.entity_key for e in group_entities(ments)] == ["b", "a"]

    def test_injected_vectors_override_mention_vectors(self):
        ments = [mention([9.0, 9.0], "x"), mention([9.0, 9.0], "y")]
        injected = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        ents = group_entities(ments, injected)
        assert np.allclose(ents[0].vector.data, [1.0, 2.0])
        assert np.allclose(ents[1].vector.data, [3.0, 4.0])

    def test_empty(self):
        assert group_entities([]) == []


class TestDetection:
    def test_logit_shape(self, schema2):
        dec = make_decoder(schema2)
        logits = dec.detection_logits(Tensor(np.random.default_rng(1).normal(size=(2, 4))))
        assert logits.shape == (2,)

    def test_types_are_bitwise_isolated(self, schema2):
        # the shared head runs row-wise: editing one type's representation
        # must leave every other type's logit bitwise unchanged
        dec = make_decoder(schema2)
        reps = np.random.default_rng(2).normal(size=(2, 4))
        base = dec.detection_logits(Tensor(reps)).data.copy()
        reps2 = reps.copy()
        reps2[1] += 3.7
        bumped = dec.detection_logits(Tensor(reps2)).data
        assert bumped[0] == base[0]          # exact, not approx
        assert bumped[1] != base[1]

    def test_loss_matches_numpy_bce(self, schema2):
        dec = make_decoder(schema2)
        logits = np.array([0.3, -1.2])
        gold = np.array([1.0, 0.0])
        got = dec.detection_loss(Tensor(logits), gold).item()
        p = 1.0 / (1.0 + np.exp(-logits))
        want = -np.log(p[0]) - np.log(1.0 - p[1])
        assert got == pytest.approx(want, abs=1e-12)

    def test_positive_weight_scales_positive_term(self, schema2):
        dec = make_decoder(schema2, w_pos=3.0)
        logits = Tensor(np.array([0.5, 0.5]))
        heavy = dec.detection_loss(logits, np.array([1.0, 0.0])).item()
        plain = make_decoder(schema2).detection_loss(logits, np.array([1.0, 0.0])).item()
        p = 1.0 / (1.0 + np.exp(-0.5))
        assert heavy - plain == pytest.approx(-2.0 * np.log(p), abs=1e-12)

    def test_loss_gradient(self, schema2):
        reps = Parameter(np.random.default_rng(3).normal(size=(2, 4)), "reps")
        dec = make_decoder(schema2, seed=1)
        gold = np.array([1.0, 0.0])
        finite_difference_check(
            lambda: dec.detection_loss(dec.detection_logits(reps), gold),
            [reps] + dec.parameters())

    def test_sentence_detection_needs_sentence_reps(self, schema2):
        dec = make_decoder(schema2, sentence_detection=True)
        with pytest.raises(ValueError, match="sentence"):
            dec.detection_logits(Tensor(np.zeros((2, 4))))

    def test_sentence_detection_shape(self, schema2):
        dec = make_decoder(schema2, sentence_detection=True)
        logits = dec.detection_logits(None, sent_reps=Tensor(np.zeros((3, 4))))
        assert logits.shape == (2,)


class TestArgumentScoring:
    def test_role_swap_symmetry(self, schema1):
        # the argument head is shared: exchanging two roles' representations
        # exchanges their logits exactly
        dec = make_decoder(schema1, seed=4)
        ents = Tensor(np.random.default_rng(5).normal(size=(3, 4)))
        r1 = Tensor(np.random.default_rng(6).normal(size=4))
        r2 = Tensor(np.random.default_rng(7).normal(size=4))
        a = dec.argument_logits(ents, r1, None).data
        b = dec.argument_logits(ents, r2, None).data
        assert np.array_equal(dec.argument_logits(ents, r2, None).data, b)
        assert np.array_equal(dec.argument_logits(ents, r1, None).data, a)
        assert not np.allclose(a, b)

    def test_path_memory_changes_scores(self, schema1):
        dec = make_decoder(schema1, seed=4)
        ents = Tensor(np.random.default_rng(8).normal(size=(2, 4)))
        role = Tensor(np.random.default_rng(9).normal(size=4))
        without = dec.argument_logits(ents, role, None).data
        with_mem = dec.argument_logits(ents, role, Tensor(np.ones(4))).data
        assert not np.allclose(without, with_mem)

    def test_path_conditioning_off_ignores_memory(self, schema1):
        dec = make_decoder(schema1, path_conditioning=False)
        ents = Tensor(np.random.default_rng(8).normal(size=(2, 4)))
        role = Tensor(np.zeros(4))
        a = dec.argument_logits(ents, role, None).data
        b = dec.argument_logits(ents, role, Tensor(np.ones(4))).data
        assert np.array_equal(a, b)


class TestArgumentLoss:
    def entities(self, n, d=4, seed=0):
        vecs = np.random.default_rng(seed).normal(size=(n, d))
        return [EntityRep(vector=Tensor(vecs[i]), entity_key=f"e{i}") for i in range(n)]

    def roles(self, schema, d=4, seed=1):
        rng = np.random.default_rng(seed)
        return [Tensor(rng.normal(size=(len(t.roles), d))) for t in schema.types]

    def test_gold_path_hand_case(self, schema1):
        # one entity, one record filling r1 with it and leaving r2 empty:
        # loss = BCE(r1 logits, [1]) + BCE(r2 logits | memory=e0, [0])
        dec = make_decoder(schema1, seed=2)
        ents = self.entities(1)
        roles = self.roles(schema1)
        rec = EventRecord("evt", {"r1": "e0", "r2": None})
        got, skipped = dec.argument_loss(ents, roles, [rec])
        assert skipped == 0
        ent_mat = ents[0].vector.reshape(1, 4)
        l1 = dec.argument_logits(ent_mat, roles[0][0], None)
        l2 = dec.argument_logits(ent_mat, roles[0][1], ents[0].vector)
        want = dec._bce(l1, np.array([1.0])) + dec._bce(l2, np.array([0.0]))
        assert got.item() == pytest.approx(want.item(), abs=1e-12)

    def test_unrecoverable_gold_argument_skipped_and_counted(self, schema1):
        dec = make_decoder(schema1)
        rec = EventRecord("evt", {"r1": "ghost", "r2": "e0"})
        loss, skipped = dec.argument_loss(self.entities(1), self.roles(schema1), [rec])
        assert skipped == 1
        assert np.isfinite(loss.item())

    def test_no_entities_skips_all_filled_slots(self, schema1):
        dec = make_decoder(schema1)
        recs = [EventRecord("evt", {"r1": "a", "r2": "b"}),
                EventRecord("evt", {"r1": "c", "r2": None})]
        loss, skipped = dec.argument_loss([], self.roles(schema1), recs)
        assert skipped == 3
        assert loss.item() == 0.0

    def test_flat_mode_unions_fillers(self, schema1):
        # two records fill r1 with different entities: flat mode scores r1
        # once with both as positives
        dec = make_decoder(schema1, seed=3)
        ents = self.entities(3)
        roles = self.roles(schema1)
        recs = [EventRecord("evt", {"r1": "e0", "r2": None}),
                EventRecord("evt", {"r1": "e2", "r2": None})]
        got, skipped = dec.argument_loss(ents, roles, recs, mode="flat")
        assert skipped == 0
        ent_mat = Tensor(np.stack([e.vector.data for e in ents]))
        zero = zeros(4)
        want = (dec._bce(dec.argument_logits(ent_mat, roles[0][0], zero),
                         np.array([1.0, 0.0, 1.0]))
                + dec._bce(dec.argument_logits(ent_mat, roles[0][1], zero),
                           np.array([0.0, 0.0, 0.0])))
        assert got.item() == pytest.approx(want.item(), abs=1e-10)

    def test_unknown_mode_rejected(self, schema1):
        dec = make_decoder(schema1)
        with pytest.raises(ValueError, match="mode"):
            dec.argument_loss(self.entities(1), self.roles(schema1), [], mode="bogus")

    def test_role_blind_uses_zero_role(self, schema1):
        # with use_role=False both roles see identical inputs at the first
        # step, so swapping role reps cannot change the loss
        dec = make_decoder(schema1, seed=5)
        ents = self.entities(2)
        rec = EventRecord("evt", {"r1": "e0", "r2": "e1"})
        a, _ = dec.argument_loss(ents, self.roles(schema1, seed=10), [rec], use_role=False)
        b, _ = dec.argument_loss(ents, self.roles(schema1, seed=11), [rec], use_role=False)
        assert a.item() == pytest.approx(b.item(), abs=1e-12)

    def test_gradient(self, schema1):
        dec = make_decoder(schema1, seed=6)
        evec = Parameter(np.random.default_rng(12).normal(size=(2, 4)), "evec")
        rvec = Parameter(np.random.default_rng(13).normal(size=(2, 4)), "rvec")
        rec = EventRecord("evt", {"r1": "e0", "r2": "e1"})

        def build():
            ents = [EntityRep(vector=evec[i], entity_key=f"e{i}") for i in range(2)]
            return dec.argument_loss(ents, [rvec], [rec])[0]

        finite_difference_check(build, [evec, rvec] + dec.parameters())


class TestExpandRecords:
    def roles_with_first_coord(self, vals):
        # role vectors whose first coordinate is the desired logit offset
        mat = np.zeros((len(vals), 4))
        mat[:, 0] = vals
        return [Tensor(mat)]

    def entity(self, first_coord, key):
        v = np.zeros(4)
        v[0] = first_coord
        return EntityRep(vector=Tensor(v), entity_key=key)

    def test_undetected_type_produces_nothing(self, schema1):
        dec = rig(make_decoder(schema1, path_conditioning=False))
        out = dec.expand_records(np.array([0.5]), [self.entity(5.0, "a")],
                                 self.roles_with_first_coord([0.0, 0.0]))
        assert out == []

    def test_no_entities_all_null_dropped(self, schema1):
        dec = rig(make_decoder(schema1))
        out = dec.expand_records(np.array([0.9]), [], self.roles_with_first_coord([0.0, 0.0]))
        assert out == []

    def test_single_positive_assignment(self, schema1):
        # entity logit 2 for r1, -2 for r2 -> record {r1: a, r2: None}
        dec = rig(make_decoder(schema1, path_conditioning=False))
        ents = [self.entity(1.0, "a")]
        out = dec.expand_records(np.array([0.9]), ents,
                                 self.roles_with_first_coord([1.0, -3.0]))
        assert len(out) == 1
        rec, score = out[0]
        assert rec == EventRecord("evt", {"r1": "a", "r2": None})
        assert score == pytest.approx(1.0 / (1.0 + np.exp(-2.0)))

    def test_branching_on_multiple_hits(self, schema1):
        # both entities clear the 0.5 bar for r1 -> two records
        dec = rig(make_decoder(schema1, path_conditioning=False))
        ents = [self.entity(1.0, "a"), self.entity(2.0, "b")]
        out = dec.expand_records(np.array([0.9]), ents,
                                 self.roles_with_first_coord([0.5, -9.0]))
        got = {rec.args["r1"] for rec, _ in out}
        assert got == {"a", "b"}

    def test_pruning_keeps_highest_score(self, schema1):
        dec = rig(make_decoder(schema1, path_conditioning=False, max_paths=1))
        ents = [self.entity(1.0, "a"), self.entity(2.0, "b")]
        out = dec.expand_records(np.array([0.9]), ents,
                                 self.roles_with_first_coord([0.5, -9.0]))
        assert len(out) == 1
        assert out[0][0].args["r1"] == "b"  # higher sigmoid survives the cap

    def test_pruning_tie_prefers_lower_entity_index(self, schema1):
        dec = rig(make_decoder(schema1, path_conditioning=False, max_paths=1))
        ents = [self.entity(1.5, "a"), self.entity(1.5, "b")]
        out = dec.expand_records(np.array([0.9]), ents,
                                 self.roles_with_first_coord([0.0, -9.0]))
        assert len(out) == 1
        assert out[0][0].args["r1"] == "a"

    def test_path_memory_feeds_later_roles(self, schema1):
        # with conditioning ON, assigning the r1 entity (first coord 1.0)
        # shifts the r2 logit from -0.5 to +0.5, flipping r2's decision
        dec = rig(make_decoder(schema1, path_conditioning=True))
        ents = [self.entity(1.0, "a")]
        roles = self.roles_with_first_coord([0.5, -1.5])
        out = dec.expand_records(np.array([0.9]), ents, roles)
        assert out[0][0].args == {"r1": "a", "r2": "a"}
        dec_off = rig(make_decoder(schema1, path_conditioning=False))
        out_off = dec_off.expand_records(np.array([0.9]), ents, roles)
        assert out_off[0][0].args == {"r1": "a", "r2": None}

    def test_duplicate_assignments_deduped(self, schema1):
        # two paths reaching the same assignment keep the higher score once
        dec = rig(make_decoder(schema1, path_conditioning=False))
        ents = [self.entity(3.0, "a")]
        out = dec.expand_records(np.array([0.9]), ents,
                                 self.roles_with_first_coord([0.0, 0.0]))
        recs = [rec for rec, _ in out]
        assert len(recs) == len({(r.event_type, tuple(sorted(r.args.items()))) for r in recs})

    def test_two_types_independent(self, schema2):
        dec = rig(make_decoder(schema2, path_conditioning=False))
        ents = [self.entity(2.0, "a")]
        roles = [Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 4)))]
        out = dec.expand_records(np.array([0.9, 0.2]), ents, roles)
        assert {rec.event_type for rec, _ in out} == {"merge"}


class TestTotalLoss:
    def test_default_weights(self):
        l = total_loss(Tensor(np.array(2.0)), Tensor(np.array(3.0)), Tensor(np.array(4.0)))
        assert l.item() == pytest.approx(0.05 * 2 + 0.95 * 3 + 0.95 * 4)

    def test_custom_weights(self):
        l = total_loss(Tensor(np.array(1.0)), Tensor(np.array(1.0)), Tensor(np.array(1.0)),
                       lam1=0.2, lam2=0.3, lam3=0.5)
        assert l.item() == pytest.approx(1.0)
