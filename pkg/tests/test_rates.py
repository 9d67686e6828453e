"""Rate-baseline tests: frozen spot values from an independent straight-line
evaluation of the closed forms, analytic limits, monotone sweeps and the
duplex dominance ordering."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relayjscc.channel import LinkState, db_to_lin
from relayjscc.rates import (
    CSV_COLUMNS,
    GridSpec,
    RateResult,
    bit_budget,
    direct_rate,
    optimize_hd_rate,
    rate_fd,
    rate_fd_cf,
    rate_fd_df,
    rate_hd_cf,
    rate_hd_df,
    rate_row,
    rate_table,
    write_rate_csv,
)

SYM = LinkState(c_sr=1.0, c_rd=1.0, c_sd=1.0, p_s=2.0, p_r=2.0)
ASYM = LinkState(c_sr=2.0, c_rd=1.5, c_sd=1.0, p_s=1.5, p_r=1.0)


class TestSpotValues:
    """Frozen outputs of a scratch scalar evaluation of each closed form."""

    def test_hd_df_symmetric(self):
        assert rate_hd_df(0.5, 0.5, 0.5, SYM) == pytest.approx(0.646240625180, abs=1e-10)

    def test_hd_df_second_term_binds(self):
        # huge c_sr makes C1 huge, exposing C2 = 1.261099 (relay power scaled
        # into its transmit period) vs 1.138421 (raw P_r)
        link = LinkState(c_sr=100.0, c_rd=1.0, c_sd=1.0, p_s=2.0, p_r=2.0)
        assert rate_hd_df(0.5, 0.5, 0.5, link) == pytest.approx(1.261098529840, abs=1e-10)
        assert rate_hd_df(0.5, 0.5, 0.5, link, p_r_mode="raw") == pytest.approx(1.138421243334, abs=1e-10)

    def test_hd_cf_symmetric(self):
        # sigma_w^2 = 1.25 exactly at this point
        assert rate_hd_cf(0.5, 0.5, SYM) == pytest.approx(0.886080129056, abs=1e-10)

    def test_hd_asymmetric_point(self):
        assert rate_hd_df(0.5, 0.25, 0.4, ASYM) == pytest.approx(0.942178414258, abs=1e-10)
        assert rate_hd_cf(0.5, 0.4, ASYM) == pytest.approx(0.853884671902, abs=1e-10)

    def test_fd_df_fixed_beta(self):
        assert rate_fd_df(0.5, SYM) == pytest.approx(0.5, abs=1e-12)

    def test_fd_cf_closed_form(self):
        assert rate_fd_cf(SYM) == pytest.approx(0.918250633859, abs=1e-10)

    def test_direct(self):
        assert direct_rate(SYM) == pytest.approx(0.792481250361, abs=1e-10)


class TestValidation:
    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.7])
    def test_df_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            rate_hd_df(bad, 0.5, 0.5, SYM)
        with pytest.raises(ValueError):
            rate_hd_df(0.5, bad, 0.5, SYM)
        with pytest.raises(ValueError):
            rate_hd_df(0.5, 0.5, bad, SYM)

    def test_cf_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            rate_hd_cf(0.0, 0.5, SYM)

    def test_p_r_mode_rejected(self):
        with pytest.raises(ValueError, match="p_r_mode"):
            rate_hd_df(0.5, 0.5, 0.5, SYM, p_r_mode="boosted")

    def test_combiner_rejected(self):
        with pytest.raises(ValueError, match="combiner"):
            rate_fd_df(0.5, SYM, combiner="mean")

    def test_grid_step_bounds(self):
        with pytest.raises(ValueError, match="step"):
            GridSpec(step=0.0)
        with pytest.raises(ValueError, match="step"):
            GridSpec(step=0.2)
        with pytest.raises(ValueError, match="range"):
            GridSpec(alpha_range=(0.5, 0.2))

    def test_grid_axis_is_open_interval(self):
        ax = GridSpec(step=0.1).axis("alpha")
        assert ax.min() > 0.0 and ax.max() < 1.0
        assert len(ax) == 9


class TestLimits:
    def test_hd_df_reduces_to_two_phase_direct(self):
        link = LinkState(c_sr=1.0, c_rd=0.0, c_sd=1.0, p_s=2.0, p_r=2.0)
        a, g = 0.4, 0.3
        ps1, ps2 = g * 2.0 / a, (1 - g) * 2.0 / (1 - a)
        two_phase = (a / 2) * math.log2(1 + ps1) + ((1 - a) / 2) * math.log2(1 + ps2)
        assert rate_hd_df(a, 1e-9, g, link) == pytest.approx(two_phase, abs=1e-6)

    def test_hd_df_governed_by_c2_for_strong_relay_link(self):
        strong = LinkState(c_sr=1e6, c_rd=1.0, c_sd=1.0, p_s=2.0, p_r=2.0)
        weak = LinkState(c_sr=1.0, c_rd=1.0, c_sd=1.0, p_s=2.0, p_r=2.0)
        # C2 does not involve c_sr, so the strong-c_sr rate is exactly C2
        assert rate_hd_df(0.5, 0.5, 0.5, strong) == pytest.approx(1.261098529840, abs=1e-9)
        assert rate_hd_df(0.5, 0.5, 0.5, weak) < rate_hd_df(0.5, 0.5, 0.5, strong)

    def test_hd_cf_dead_relay_link_floors_and_warns(self):
        link = LinkState(c_sr=1.0, c_rd=0.0, c_sd=1.0, p_s=2.0, p_r=2.0)
        a, g = 0.5, 0.5
        with pytest.warns(UserWarning, match="degenerated"):
            rate = rate_hd_cf(a, g, link)
        ps1, ps2 = g * 2.0 / a, (1 - g) * 2.0 / (1 - a)
        two_phase = (a / 2) * math.log2(1 + ps1) + ((1 - a) / 2) * math.log2(1 + ps2)
        assert rate == pytest.approx(two_phase, abs=1e-12)

    def test_hd_cf_infinite_relay_link_gives_free_observation(self):
        link = LinkState(c_sr=1.0, c_rd=1e9, c_sd=1.0, p_s=2.0, p_r=2.0)
        a, g = 0.5, 0.5
        ps1, ps2 = g * 2.0 / a, (1 - g) * 2.0 / (1 - a)
        mimo_like = (a / 2) * math.log2(1 + ps1 + ps1) + ((1 - a) / 2) * math.log2(1 + ps2)
        assert rate_hd_cf(a, g, link) == pytest.approx(mimo_like, rel=1e-9)

    def test_fd_no_relay_limit(self):
        link = LinkState(c_sr=1.0, c_rd=0.0, c_sd=1.0, p_s=1.0, p_r=1e-12)
        res = rate_fd(link)
        assert res.r_star == pytest.approx(0.5, abs=1e-3)  # 1/2 log2(2)

    def test_fd_cf_handles_exact_zero_relay(self):
        link = LinkState(c_sr=1.0, c_rd=0.0, c_sd=1.0, p_s=1.0, p_r=1.0)
        assert rate_fd_cf(link) == pytest.approx(0.5, abs=1e-12)

    def test_hd_optimizer_no_relay_limit(self):
        link = LinkState(c_sr=1.0, c_rd=0.0, c_sd=1.0, p_s=2.0, p_r=1e-12)
        res = optimize_hd_rate(link, GridSpec(step=2e-3))
        assert res.r_star == pytest.approx(direct_rate(link), abs=1e-3)
        # best split spends power uniformly: per-symbol powers equal across
        # phases when gamma == alpha
        arg = res.argmax
        assert arg["gamma"] == pytest.approx(arg["alpha"], abs=0.05)

    def test_df_wins_with_strong_source_relay_link(self):
        link = LinkState(c_sr=math.sqrt(db_to_lin(10.0)), c_rd=1.0, c_sd=1.0, p_s=2.0, p_r=2.0)
        res = optimize_hd_rate(link)
        assert res.r_df >= res.r_cf
        assert res.winner == "df"


class TestSearch:
    def test_bit_exact_reproducibility(self):
        r1 = optimize_hd_rate(ASYM)
        r2 = optimize_hd_rate(ASYM)
        assert r1 == r2

    def test_refinement_matches_exhaustive_on_coarse_grid(self):
        grid = GridSpec(step=0.02)
        assert optimize_hd_rate(ASYM, grid, refine=True).r_star == pytest.approx(
            optimize_hd_rate(ASYM, grid, refine=False).r_star, abs=1e-12
        )

    def test_step_halving_stability(self):
        coarse = optimize_hd_rate(ASYM, GridSpec(step=2e-3))
        fine = optimize_hd_rate(ASYM, GridSpec(step=1e-3))
        assert fine.r_star >= coarse.r_star - 1e-9
        assert fine.r_star == pytest.approx(coarse.r_star, abs=1e-3)
        for key, val in coarse.argmax.items():
            assert abs(fine.argmax[key] - val) <= 2e-3 + 1e-12

    def test_beats_independent_coarse_scan(self):
        # straight-line triple loop, deliberately not using the module's grid
        best = -1.0
        for ai in range(1, 20):
            for bi in range(1, 20):
                for gi in range(1, 20):
                    best = max(best, rate_hd_df(ai / 20, bi / 20, gi / 20, ASYM))
        res = optimize_hd_rate(ASYM)
        assert res.r_df >= best - 1e-9

    def test_fd_sum_combiner_exceeds_min(self):
        assert rate_fd(SYM, combiner="sum").r_df >= rate_fd(SYM, combiner="min").r_df


class TestOrderings:
    def _sweep(self, param, values):
        rates_hd, rates_fd = [], []
        for v in values:
            kw = dict(c_sr=1.0, c_rd=1.0, c_sd=1.0, p_s=2.0, p_r=2.0)
            kw[param] = v
            link = LinkState(**kw)
            rates_hd.append(optimize_hd_rate(link, GridSpec(step=5e-3)).r_star)
            rates_fd.append(rate_fd(link).r_star)
        return rates_hd, rates_fd

    @pytest.mark.parametrize("param", ["c_sr", "c_rd", "p_s", "p_r"])
    def test_monotone_in_each_link_parameter(self, param):
        values = np.linspace(0.2, 3.0, 10)
        hd, fd = self._sweep(param, values)
        for seq in (hd, fd):
            diffs = np.diff(seq)
            assert (diffs >= -1e-6).all(), f"{param}: {seq}"

    def test_duplex_dominance_on_link_grid(self):
        dbs = [0.0, 10.0 / 3.0, 20.0 / 3.0, 10.0]
        for sr_db in dbs:
            for rd_db in dbs:
                link = LinkState.from_db(c_sr_db=sr_db, c_rd_db=rd_db, p_s_db=3.0, p_r_db=3.0)
                hd = optimize_hd_rate(link, GridSpec(step=5e-3)).r_star
                fd = rate_fd(link).r_star
                c = direct_rate(link)
                assert fd >= hd - 1e-6, (sr_db, rd_db)
                assert hd >= c - 1e-3, (sr_db, rd_db)

    @settings(max_examples=30, deadline=None)
    @given(
        a=st.floats(0.05, 0.95),
        b=st.floats(0.05, 0.95),
        g=st.floats(0.05, 0.95),
        c_sr=st.floats(0.1, 5.0),
        c_rd=st.floats(0.1, 5.0),
        p=st.floats(0.1, 10.0),
    )
    def test_rates_finite_nonnegative(self, a, b, g, c_sr, c_rd, p):
        link = LinkState(c_sr=c_sr, c_rd=c_rd, c_sd=1.0, p_s=p, p_r=p)
        df = rate_hd_df(a, b, g, link)
        cf = rate_hd_cf(a, g, link)
        assert math.isfinite(df) and df >= 0.0
        assert math.isfinite(cf) and cf >= 0.0
        # CF never does worse than ignoring the relay's observation entirely
        ps1, ps2 = g * p / a, (1 - g) * p / (1 - a)
        two_phase = (a / 2) * math.log2(1 + ps1) + ((1 - a) / 2) * math.log2(1 + ps2)
        assert cf >= two_phase - 1e-9


class TestCsvAndBudget:
    def test_row_schema_and_winner_argmax(self):
        res = optimize_hd_rate(SYM, GridSpec(step=0.01))
        row = rate_row(SYM, res)
        assert tuple(row.keys()) == CSV_COLUMNS
        assert row["p_s_db"] == pytest.approx(10 * math.log10(2.0))
        if res.winner == "cf":
            assert row["beta"] == ""  # CF does not search beta
        else:
            assert row["beta"] != ""

    def test_table_and_file_round_trip(self, tmp_path):
        links = [SYM, ASYM]
        rows = rate_table(links, duplex="fd")
        assert len(rows) == 2
        assert all(r["alpha"] == "" for r in rows)  # full duplex has no split
        path = write_rate_csv(tmp_path / "rates.csv", rows)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 3

    def test_table_rejects_unknown_duplex(self):
        with pytest.raises(ValueError, match="duplex"):
            rate_table([SYM], duplex="simplex")

    def test_bit_budget_formula(self):
        assert bit_budget(1024, 0.25, 0.75) == 384
        assert bit_budget(1024, 0.5, 0.75) == 768  # doubling rho doubles bits
        assert bit_budget(3072, 1.0 / 6.0, 0.0) == 0
        assert bit_budget(10, 0.1, 0.333) == math.floor(2 * 10 * 0.1 * 0.333)

    def test_bit_budget_validation(self):
        with pytest.raises(ValueError):
            bit_budget(0, 0.5, 1.0)
        with pytest.raises(ValueError):
            bit_budget(10, -0.5, 1.0)
        with pytest.raises(ValueError):
            bit_budget(10, 0.5, -1.0)
