import pytest

from helpers import products, sym_reachable
from setmc.counterexample import format_dataset
from setmc.cycledetect import ndfs
from setmc.lang import parse_model
from setmc.peterson import generate_peterson


class TestGenerator:
    @pytest.mark.parametrize("r", [1, 2, 255, 256, 65535])
    def test_parses(self, r):
        m = parse_model(generate_peterson(r))
        (l,) = m.input_vars
        assert (l.lo, l.hi) == (0, r)
        assert l.width == (8 if r <= 255 else 16)
        assert [p.name for p in m.properties] == ["liveness", "progress"]

    @pytest.mark.parametrize("r", [0, -1, 65536, 2.5])
    def test_rejects(self, r):
        with pytest.raises(ValueError):
            generate_peterson(r)

    def test_filter_lock(self):
        m = parse_model(generate_peterson(3, procs=3))
        assert [p.name for p in m.processes] == ["P0", "P1", "P2"]


class TestBehaviour:
    @pytest.mark.parametrize("procs", [2, 3])
    def test_mutual_exclusion(self, procs):
        sym, _ = products(generate_peterson(3, procs), "liveness")
        crit = [p.location_index("crit") for p in sym.model.processes]
        for s in sym_reachable(sym):
            inside = [i for i, loc in enumerate(s.control.locations) if loc == crit[i]]
            assert len(inside) <= 1

    @pytest.mark.parametrize("r", [2, 4, 8])
    def test_verdicts(self, r):
        text = generate_peterson(r)
        for ts in products(text, "liveness"):
            assert ndfs(ts).holds
        for ts in products(text, "progress"):
            assert not ndfs(ts).holds

    def test_sym_data_sets(self):
        # the data sets reached are {0..r} and {0..r-1}
        r = 6
        sym, _ = products(generate_peterson(r), "liveness")
        sets = {format_dataset(s.data) for s in sym_reachable(sym)}
        assert sets == {"{0..6}", "{0..5}"}

    def test_l_sets_include_shifted_range(self):
        # expected {0..r}, {1..r}, ... among the stored l-sets; (l + 1) % r maps
        # {0..r} to {0..r-1} and that set to itself, so {1..r} never appears
        r = 6
        sym, _ = products(generate_peterson(r), "liveness")
        sets = {format_dataset(s.data) for s in sym_reachable(sym)}
        assert "{0..6}" in sets
        assert "{1..6}" in sets

    def test_exp_grows_linearly(self):
        counts = []
        for r in (4, 8, 16):
            _, exp = products(generate_peterson(r), "liveness")
            counts.append(len(sym_reachable(exp)))
        assert counts[2] - counts[1] == 2 * (counts[1] - counts[0])
