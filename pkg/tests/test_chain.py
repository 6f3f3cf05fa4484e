import os
import random

import pytest
from hypothesis import given, settings, strategies as st

from vpkiaas import _chain_py, chain
from vpkiaas.core.types import Pseudonym

import reference as ref

try:
    from vpkiaas import _chain_ext
except ImportError:
    _chain_ext = None

KERNELS = [_chain_py] + ([_chain_ext] if _chain_ext is not None else [])


def _inputs(n, seed=0):
    r = random.Random(seed)
    return (r.randbytes(32), [b"\x04" + r.randbytes(64) for _ in range(n)],
            r.randrange(0, 2**31) // 300 * 300, 300, r.randbytes(32))


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("n", [1, 2, 7, 64])
def test_kernel_matches_reference(kernel, n):
    ik_tkt, keys, start, tau, rnd_v = _inputs(n, n)
    hashes, iks, sns = kernel.derive_chain(ik_tkt, keys, start, tau, rnd_v)
    expected = ref.chain(ik_tkt, keys, start, tau, rnd_v)
    assert hashes == [e[2] for e in expected]
    assert iks == [e[3] for e in expected]
    assert sns == [e[4] for e in expected]


@pytest.mark.skipif(_chain_ext is None, reason="compiled kernel not built")
@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(-(2**40), 2**40), st.integers(1, 10**6), st.binary(min_size=1, max_size=70))
def test_compiled_equals_fallback(n, start, tau, key):
    ik, rnd = os.urandom(32), os.urandom(32)
    keys = [key + bytes([i % 256]) for i in range(n)]
    assert _chain_ext.derive_chain(ik, keys, start, tau, rnd) == _chain_py.derive_chain(ik, keys, start, tau, rnd)
    first = _chain_py.derive_chain(ik, keys, start, tau, rnd)[2][0]
    assert _chain_ext.chain_serials(first, rnd, n) == _chain_py.chain_serials(first, rnd, n)


def test_batch_serials_follow_from_first_serial_and_rnd():
    ik_tkt, keys, start, tau, rnd_v = _inputs(20)
    _, _, sns = chain.derive_chain(ik_tkt, keys, start, tau, rnd_v)
    assert chain.chain_serials(sns[0], rnd_v, 20) == sns


def test_backend_is_reported():
    assert chain.BACKEND in ("cython", "python")


@pytest.mark.parametrize("t,tau,epoch,expected", [
    (0, 300, 0, 0), (1, 300, 0, 300), (300, 300, 0, 300), (299, 300, 0, 300),
    (-1, 300, 0, 0), (10, 300, 7, 7 + 300), (7, 300, 7, 7),
])
def test_align(t, tau, epoch, expected):
    assert chain.align(t, tau, epoch) == expected


@given(st.integers(-(10**12), 10**12), st.integers(1, 10**5), st.integers(-(10**6), 10**6))
def test_align_is_smallest_boundary_not_before(t, tau, epoch):
    a = chain.align(t, tau, epoch)
    assert (a - epoch) % tau == 0 and t <= a < t + tau


def test_slots_three_from_zero():
    assert chain.slots(0, 300, 3) == [(0, 300), (300, 600), (600, 900)]


def test_daily_count_lifetimes():
    assert chain.lifetime_for_daily_count(100) == 864
    assert chain.lifetime_for_daily_count(500) == pytest.approx(172.8)


def _batch(n=5, tau=300, start=3000):
    ik_tkt, keys, _, _, rnd_v = _inputs(n)
    _, iks, sns = chain.derive_chain(ik_tkt, keys, start, tau, rnd_v)
    ps = [Pseudonym(sn, k, ik, start + i * tau, start + (i + 1) * tau, "pca")
          for i, (k, ik, sn) in enumerate(zip(keys, iks, sns))]
    return ps, rnd_v, ik_tkt


def test_verify_batch_accepts_honest():
    ps, rnd_v, ik = _batch()
    assert chain.verify_batch(ps, rnd_v, ik, 300, expected_start=3000).ok


@pytest.mark.parametrize("mutate,reason", [
    (lambda ps: ps.__setitem__(2, ps[2].__class__(**{**vars(ps[2]), "serial": bytes(32)})), "serial"),
    (lambda ps: ps.__setitem__(1, ps[1].__class__(**{**vars(ps[1]), "t_s": ps[1].t_s - 150, "t_e": ps[1].t_e - 150})), "alignment"),
    (lambda ps: ps.__setitem__(1, ps[1].__class__(**{**vars(ps[1]), "t_s": ps[0].t_s, "t_e": ps[0].t_e})), "overlap"),
    (lambda ps: ps.__setitem__(0, ps[0].__class__(**{**vars(ps[0]), "t_e": ps[0].t_e + 1})), "lifetime"),
    (lambda ps: ps.__setitem__(3, ps[3].__class__(**{**vars(ps[3]), "ik_p": bytes(32)})), "ik"),
])
def test_verify_batch_rejects(mutate, reason):
    ps, rnd_v, ik = _batch()
    mutate(ps)
    check = chain.verify_batch(ps, rnd_v, ik, 300)
    assert not check.ok and check.reason == reason


def test_verify_batch_rejects_wrong_start_and_empty():
    ps, rnd_v, ik = _batch()
    assert chain.verify_batch(ps, rnd_v, ik, 300, expected_start=3300).reason == "start"
    assert chain.verify_batch([], rnd_v, ik, 300).reason == "empty"
