import numpy as np
import pytest

from planloop.domains import GeneratorConfig, generate, registry
from planloop.pddl import parse_domain
from planloop.tokenizer import (DecodeError, SPECIALS, TokenizeError, TokenSeq,
                                Vocabulary, build_vocab, decode_plan,
                                decode_problem, encode_action, encode_plan,
                                encode_problem)


@pytest.fixture(scope="module")
def bw_vocab(bw_dom):
    return build_vocab(bw_dom, {"block": 25})


class TestBuildVocab:
    def test_blocksworld_size(self, bw_vocab):
        # 7 specials + 5 predicates + 4 operators + 1 type + 25 objects
        assert bw_vocab.size == 42
        assert bw_vocab.tokens[:7] == SPECIALS
        assert "block-25" in bw_vocab.tokens
        assert "block-26" not in bw_vocab.tokens

    def test_specials_only(self):
        dom = parse_domain("(define (domain nil) (:requirements :strips))")
        vocab = build_vocab(dom, {})
        assert vocab.size == len(SPECIALS)

    def test_rebuild_is_identical(self, bw_dom):
        a = build_vocab(bw_dom, {"block": 25})
        b = build_vocab(bw_dom, {"block": 25})
        assert a.tokens == b.tokens
        assert a.fingerprint() == b.fingerprint()

    def test_missing_limit_errors(self, bw_dom):
        with pytest.raises(TokenizeError, match="block"):
            build_vocab(bw_dom, {})

    def test_serialization_round_trip(self, bw_vocab):
        again = Vocabulary.from_json(bw_vocab.to_json())
        assert again.tokens == bw_vocab.tokens
        assert again.fingerprint() == bw_vocab.fingerprint()


class TestEncodeProblem:
    def test_layout_and_round_trip(self, bw_dom, bw_vocab, three_block_problem):
        seq = encode_problem(three_block_problem, bw_vocab)
        toks = [bw_vocab.token(i) for i in seq.ids]
        assert toks[0] == "[startofproblem]"
        assert toks[1] == "[objects]"
        assert toks[-1] == "[startofplan]"
        assert seq.boundary == len(seq.ids)
        assert toks.count("[init]") == 1 and toks.count("[goal]") == 1
        back = decode_problem(seq, bw_vocab, bw_dom)
        assert back.structurally_equal(three_block_problem)

    def test_empty_goal_between_marks(self, bw_dom, bw_vocab, swap_problem):
        import dataclasses
        prob = dataclasses.replace(swap_problem, goal=())
        seq = encode_problem(prob, bw_vocab)
        toks = [bw_vocab.token(i) for i in seq.ids]
        at = toks.index("[goal]")
        assert toks[at + 1] == "[startofplan]"

    def test_limit_exceeded(self, bw_dom):
        vocab = build_vocab(bw_dom, {"block": 2})
        blocks = tuple((f"block-{i+1}", "block") for i in range(3))
        from planloop.pddl import Atom, ProblemDef
        init = tuple(sorted(
            [Atom("ontable", (b,)) for b, _ in blocks]
            + [Atom("clear", (b,)) for b, _ in blocks]
            + [Atom("handempty", ())]))
        prob = ProblemDef("p", "blocksworld", blocks, init, ())
        with pytest.raises(TokenizeError, match="exceed"):
            encode_problem(prob, vocab)

    def test_non_canonical_names_are_normalized(self, bw_dom, bw_vocab):
        from planloop.pddl import Atom, ProblemDef
        prob = ProblemDef(
            "p", "blocksworld", (("zed", "block"), ("abe", "block")),
            tuple(sorted([Atom("handempty", ()), Atom("ontable", ("zed",)),
                          Atom("ontable", ("abe",)), Atom("clear", ("zed",)),
                          Atom("clear", ("abe",))])),
            (Atom("on", ("abe", "zed")),))
        seq = encode_problem(prob, bw_vocab)
        back = decode_problem(seq, bw_vocab, bw_dom)
        names = [o for o, _ in back.objects]
        assert names == ["block-1", "block-2"]
        # zed declared first, so zed -> block-1 and the goal follows
        assert back.goal[0].args == ("block-2", "block-1")


class TestActions:
    def test_unstack_span(self, bw_vocab):
        ids = encode_action("unstack", ("block-1", "block-2"), bw_vocab)
        assert [bw_vocab.token(i) for i in ids] == \
            ["unstack", "block-1", "block-2"]

    def test_zero_arity_operator(self):
        dom = parse_domain("""
            (define (domain bells) (:requirements :strips)
              (:predicates (rung))
              (:action ring :parameters () :precondition (and)
                       :effect (and (rung))))""")
        vocab = build_vocab(dom, {})
        ids = encode_plan([("ring", ())], vocab)
        assert len(ids) == 2      # operator token + [endofplan]
        assert decode_plan(ids, vocab, dom) == [("ring", ())]

    def test_bad_argument_token_fails(self, bw_dom, bw_vocab):
        ids = [bw_vocab.id("unstack"), bw_vocab.id("block-1"),
               bw_vocab.id("[startofplan]"), bw_vocab.end_of_plan_id]
        with pytest.raises(DecodeError, match="malformed"):
            decode_plan(ids, bw_vocab, bw_dom)


class TestDecodePlan:
    def test_immediate_end_is_empty_plan(self, bw_dom, bw_vocab):
        assert decode_plan([bw_vocab.end_of_plan_id], bw_vocab, bw_dom) == []

    def test_three_actions_round_trip(self, bw_dom, bw_vocab):
        actions = [("pickup", ("block-3",)),
                   ("stack", ("block-3", "block-1")),
                   ("unstack", ("block-3", "block-1"))]
        ids = encode_plan(actions, bw_vocab)
        assert decode_plan(ids, bw_vocab, bw_dom) == actions

    def test_truncation_tagged(self, bw_dom, bw_vocab):
        ids = encode_plan([("pickup", ("block-3",))], bw_vocab)[:-1]
        with pytest.raises(DecodeError) as err:
            decode_plan(ids, bw_vocab, bw_dom)
        assert err.value.reason == "truncated"

    def test_cut_action_tagged_truncated(self, bw_dom, bw_vocab):
        ids = [bw_vocab.id("unstack"), bw_vocab.id("block-1")]
        with pytest.raises(DecodeError) as err:
            decode_plan(ids, bw_vocab, bw_dom)
        assert err.value.reason == "truncated"


def _plan_fuzz(domain_name: str, vocab, dom, rng, count: int):
    types = [t for t, _ in dom.types]
    objects = {t: [tok for tok in vocab.tokens
                   if tok.rpartition("-")[0] == t
                   and tok.rpartition("-")[2].isdigit()] for t in types}
    ops = [op for op in dom.operators
           if all(objects[typ] for _, typ in op.params)]
    for _ in range(count):
        plan = []
        for _ in range(int(rng.integers(0, 12))):
            op = ops[int(rng.integers(len(ops)))]
            args = tuple(objects[typ][int(rng.integers(len(objects[typ])))]
                         for _, typ in op.params)
            plan.append((op.name, args))
        ids = encode_plan(plan, vocab)
        assert decode_plan(ids, vocab, dom) == plan


class TestRoundTripFuzz:
    # problem fuzz counts are scaled per domain generation cost; plans are
    # cheap so every domain gets the full batch
    @pytest.mark.parametrize("domain_name,n_problems,n_plans", [
        ("blocksworld", 10_000, 10_000),
        ("logistics", 10_000, 10_000),
        ("labyrinth", 2_000, 10_000),
        ("sokoban", 1_500, 10_000),
    ])
    def test_round_trip_and_injectivity(self, domain_name, n_problems, n_plans):
        spec = registry()[domain_name]
        dom = spec.domain_def()
        vocab = build_vocab(dom, spec.default_limits)
        rng = np.random.Generator(np.random.PCG64(99))
        _plan_fuzz(domain_name, vocab, dom, rng, 200)

        seen = set()
        ids_seen = set()
        produced = 0
        cfg_kwargs = dict(domain=domain_name, count=1, seed=0)
        # sample via the domain generators directly to keep this fast
        sampler = spec.sample
        for i in range(n_problems):
            prng = np.random.Generator(np.random.PCG64(1000 + i))
            if domain_name == "blocksworld":
                prob = sampler(prng, f"f{i}", int(prng.integers(3, 7)))
            elif domain_name == "logistics":
                prob = sampler(prng, f"f{i}", int(prng.integers(1, 3)),
                               int(prng.integers(1, 3)),
                               int(prng.integers(1, 4)),
                               int(prng.integers(1, 3)))
            elif domain_name == "labyrinth":
                prob = sampler(prng, f"f{i}", 3)
            else:
                prob = sampler(prng, f"f{i}", 5, 5,
                               int(prng.integers(1, 3)),
                               int(prng.integers(0, 4)))
            seq = encode_problem(prob, vocab)
            back = decode_problem(seq, vocab, dom)
            assert back.structurally_equal(prob), domain_name
            h = prob.structural_hash()
            if h not in seen:
                seen.add(h)
                produced += 1
                assert seq.ids not in ids_seen, "injectivity violated"
                ids_seen.add(seq.ids)
        assert produced > n_problems // 2

    def test_plan_fuzz_full(self, bw_dom):
        vocab = build_vocab(bw_dom, {"block": 25})
        rng = np.random.Generator(np.random.PCG64(7))
        _plan_fuzz("blocksworld", vocab, bw_dom, rng, 10_000)


class TestInjectivity:
    def test_distinct_problems_distinct_sequences(self):
        spec = registry()["blocksworld"]
        dom = spec.domain_def()
        vocab = build_vocab(dom, spec.default_limits)
        cfg = GeneratorConfig(domain="blocksworld", count=300, seed=17)
        seqs = {}
        for rec in generate(cfg).problems:
            seq = encode_problem(rec.problem, vocab).ids
            assert seq not in seqs, "two distinct problems encoded equal"
            seqs[seq] = rec.id
