"""Self-contained invariant suite behind the ``validate`` CLI command.

Every check runs on a small instance (a few antennas, three surface
elements) so the whole suite finishes in seconds.  Checks are written
against first-principles re-computations, not against the code under test,
so they catch sign and indexing mistakes rather than reproducing them.
"""

from __future__ import annotations

import dataclasses
import tempfile
from pathlib import Path

import numpy as np

from . import channels as chx
from . import harness, network, phase_opt, solver, wmmse
from .config import default_config


def _synthetic(rng: np.random.Generator, nl=2, kd=1, ku=1, mbt=3, mbr=2,
               mut=3, mur=2, m=3, bd=1, bu=1, noise=1e-2, sic_db=20.0,
               p_bs=1.0, p_ue=0.5, scale=1.0) -> chx.ChannelSet:
    """Random well-scaled instance for algebraic checks."""

    def cn(*shape):
        return scale * (rng.standard_normal(shape)
                        + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    return chx.ChannelSet(
        h_db=cn(nl, kd, nl, mur, mbt), h_bb=cn(nl, nl, mbr, mbt),
        h_bu=cn(nl, nl, ku, mbr, mut), h_du=cn(nl, kd, nl, ku, mur, mut),
        g_br=cn(nl, mbr, m), g_dr=cn(nl, kd, mur, m),
        g_rb=cn(nl, m, mbt), g_ru=cn(nl, ku, m, mut),
        noise_bs_watt=noise, noise_ue_watt=noise, sic_db=sic_db,
        power_bs_watt=p_bs, power_ue_watt=p_ue,
        streams_dl=bd, streams_ul=bu, seed=0)


def _feasible_point(rng, ch) -> tuple[network.PrecoderSet, network.PhaseState]:
    cfg = solver.SolverConfig()
    return solver.initialize(ch, cfg, int(rng.integers(1 << 30)))


def _cov_bruteforce(ch, prec, phase, l, k, direction) -> np.ndarray:
    """Interference covariance assembled entry by entry from raw links."""
    phi = phase.phi

    def eff(direct, g_rx, g_tx):
        return direct + g_rx @ np.diag(phi) @ g_tx

    rho_inv = 10.0 ** (-ch.sic_db / 10.0)
    if direction == "ul":
        v = ch.noise_bs_watt * np.eye(ch.bs_rx, dtype=complex)
        for j in range(ch.num_cells):
            for i in range(ch.users_ul):
                if (j, i) == (l, k):
                    continue
                h = eff(ch.h_bu[l, j, i], ch.g_br[l], ch.g_ru[j, i])
                v = v + h @ prec.f_ul[j, i] @ prec.f_ul[j, i].conj().T @ h.conj().T
        for j in range(ch.num_cells):
            coef = rho_inv if j == l else 1.0
            h = eff(ch.h_bb[l, j], ch.g_br[l], ch.g_rb[j])
            for i in range(ch.users_dl):
                v = v + coef * (h @ prec.f_dl[j, i]
                                @ prec.f_dl[j, i].conj().T @ h.conj().T)
        return v
    v = ch.noise_ue_watt * np.eye(ch.ue_rx, dtype=complex)
    for j in range(ch.num_cells):
        h = eff(ch.h_db[l, k, j], ch.g_dr[l, k], ch.g_rb[j])
        for i in range(ch.users_dl):
            if (j, i) == (l, k):
                continue
            v = v + h @ prec.f_dl[j, i] @ prec.f_dl[j, i].conj().T @ h.conj().T
    for j in range(ch.num_cells):
        for i in range(ch.users_ul):
            h = eff(ch.h_du[l, k, j, i], ch.g_dr[l, k], ch.g_ru[j, i])
            v = v + h @ prec.f_ul[j, i] @ prec.f_ul[j, i].conj().T @ h.conj().T
    return v


def run_validation() -> list[tuple[str, bool, str]]:
    """Run every check; returns (name, passed, detail) per check."""
    results: list[tuple[str, bool, str]] = []

    def check(name: str, fn) -> None:
        try:
            detail = fn() or ""
            results.append((name, True, detail))
        except Exception as exc:  # a failed check must not stop the suite
            results.append((name, False, f"{type(exc).__name__}: {exc}"))

    rng = np.random.default_rng(20240817)

    # -- geometry and generation ---------------------------------------------

    def chk_anchors():
        cfg = default_config()
        _dl, ul_centers = chx.user_cluster_centers(cfg)
        user = ul_centers[0]
        bs = np.asarray(cfg.bs_positions[0])
        ris = np.asarray(cfg.ris_position)
        d_direct = float(np.linalg.norm(user - bs))
        pl1 = chx.path_loss_db(d_direct, cfg.pathloss_exp_bs_user,
                               cfg.pathloss_ref_db)
        assert abs(pl1 - (-123.19)) <= 0.01, pl1
        d1 = float(np.linalg.norm(ris - bs))
        d2 = float(np.linalg.norm(user - ris))
        pl2 = chx.reflected_path_loss_db(d1, d2, cfg.pathloss_exp_ris,
                                         cfg.pathloss_ref_db)
        assert abs(pl2 - (-156.84)) <= 0.01, pl2
        pl3 = chx.reflected_path_loss_db(d1, d2, 2.8, cfg.pathloss_ref_db)
        assert abs(pl3 - (-183.25)) <= 0.01, pl3
        return f"{pl1:.2f} / {pl2:.2f} / {pl3:.2f} dB"

    check("pathloss reference distances", chk_anchors)

    def chk_steering():
        v = chx.steering_vector(0.7, 8, 0.5)
        assert v[0] == 1.0 + 0.0j
        assert np.allclose(np.abs(v), 1.0, atol=1e-12)
        try:
            chx.steering_vector(0.1, 0)
        except ValueError:
            return
        raise AssertionError("zero-size array accepted")

    check("steering vector basics", chk_steering)

    def chk_generation():
        cfg = dataclasses.replace(default_config(), ris_elements=4)
        a = chx.generate_realization(cfg, 3)
        b = chx.generate_realization(cfg, 3)
        for f in ("h_db", "h_bb", "h_bu", "h_du", "g_br", "g_dr", "g_rb", "g_ru"):
            assert np.array_equal(getattr(a, f), getattr(b, f)), f
        c = chx.generate_realization(cfg, 4)
        assert not np.array_equal(a.h_db, c.h_db)
        off = chx.generate_realization(
            dataclasses.replace(cfg, direct_links_enabled=False), 3)
        assert np.all(off.h_db == 0) and np.all(off.h_bu == 0)
        assert np.array_equal(off.g_br, a.g_br)

    check("seeded generation determinism", chk_generation)

    # -- rates and covariances -----------------------------------------------

    def chk_covariances():
        ch = _synthetic(rng, bd=2, bu=2, mbt=4, mur=3, mut=4, mbr=3, kd=2, ku=2)
        prec, phase = _feasible_point(rng, ch)
        worst = 0.0
        for l in range(ch.num_cells):
            for k in range(ch.users_ul):
                got = network.ul_interference_covariance(l, k, ch, prec, phase)
                ref = _cov_bruteforce(ch, prec, phase, l, k, "ul")
                worst = max(worst, np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
                assert np.max(np.abs(got - got.conj().T)) <= 1e-10
                assert np.linalg.eigvalsh(got).min() >= ch.noise_bs_watt - 1e-9
            for k in range(ch.users_dl):
                got = network.dl_interference_covariance(l, k, ch, prec, phase)
                ref = _cov_bruteforce(ch, prec, phase, l, k, "dl")
                worst = max(worst, np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
        assert worst <= 1e-10, worst
        return f"max rel dev {worst:.1e}"

    check("interference covariance vs brute force", chk_covariances)

    def chk_rates():
        ch = _synthetic(rng, bd=2, bu=2, mbt=4, mur=3, mut=4, mbr=3)
        prec, phase = _feasible_point(rng, ch)
        r = network.sum_rate(ch, prec, phase)
        assert np.all(r.ul >= 0) and np.all(r.dl >= 0)
        assert abs(r.sum_rate - (r.ul_total + r.dl_total)) <= 1e-12
        # unitary right rotation of a precoder leaves its rate unchanged
        q, _ = np.linalg.qr(rng.standard_normal((2, 2))
                            + 1j * rng.standard_normal((2, 2)))
        rot = dataclasses.replace(prec, f_ul=prec.f_ul.copy())
        rot.f_ul[0, 0] = rot.f_ul[0, 0] @ q
        r2 = network.sum_rate(ch, rot, phase)
        assert abs(r2.ul[0, 0] - r.ul[0, 0]) <= 1e-8
        zero = dataclasses.replace(prec, f_ul=np.zeros_like(prec.f_ul))
        assert network.sum_rate(ch, zero, phase).ul_total == 0.0

    check("rate properties", chk_rates)

    # -- wmmse block -----------------------------------------------------------

    def chk_wmmse():
        ch = _synthetic(rng, bd=2, bu=2, mbt=4, mur=3, mut=4, mbr=3)
        prec, phase = _feasible_point(rng, ch)
        aux = wmmse.update_auxiliaries(ch, prec, phase)
        r = network.sum_rate(ch, prec, phase)
        for l in range(ch.num_cells):
            for k in range(ch.users_ul):
                assert np.max(np.abs(aux.w_ul[l, k] @ aux.e_ul[l, k]
                                     - np.eye(2))) <= 1e-8
                s = wmmse.surrogate_rate(aux.w_ul[l, k], aux.e_ul[l, k], 2)
                assert abs(s - r.ul[l, k]) <= 1e-8 * max(1.0, abs(r.ul[l, k]))
            for k in range(ch.users_dl):
                s = wmmse.surrogate_rate(aux.w_dl[l, k], aux.e_dl[l, k], 2)
                assert abs(s - r.dl[l, k]) <= 1e-8 * max(1.0, abs(r.dl[l, k]))

    check("weighted-MSE equals rate at optimal filters", chk_wmmse)

    def chk_decoder_optimality():
        ch = _synthetic(rng)
        prec, phase = _feasible_point(rng, ch)
        eff = network.effective_channels(ch, phase)
        v = network.ul_interference_covariance(0, 0, ch, prec, phase)
        h, f = eff.bu[0, 0, 0], prec.f_ul[0, 0]
        u = wmmse.mmse_decoder(h, f, v)
        e0 = float(np.real(np.trace(wmmse.mse_matrix(u, h, f, v))))
        for _ in range(40):
            d = rng.standard_normal(u.shape) + 1j * rng.standard_normal(u.shape)
            d *= 1e-2 / np.linalg.norm(d)
            e1 = float(np.real(np.trace(wmmse.mse_matrix(u + d, h, f, v))))
            assert e1 >= e0 - 1e-12, (e0, e1)

    check("wiener filter local optimality", chk_decoder_optimality)

    def chk_precoder_update():
        ch = _synthetic(rng, bd=2, bu=2, mbt=4, mur=3, mut=4, mbr=3, kd=2, ku=2)
        prec, phase = _feasible_point(rng, ch)
        aux = wmmse.update_auxiliaries(ch, prec, phase)
        before = wmmse.weighted_mse_objective(ch, phase, aux, prec)
        new, solves = wmmse.update_all_precoders(ch, phase, aux)
        after = wmmse.weighted_mse_objective(ch, phase, aux, new)
        assert after <= before + 1e-10 * abs(before), (before, after)
        new.check_budgets(ch.power_bs_watt, ch.power_ue_watt)
        for ms in solves:
            if ms.multiplier == 0.0:
                assert ms.power_watt <= ms.budget * (1 + 1e-9)
            else:
                assert abs(ms.power_watt - ms.budget) <= 1e-6 * ms.budget
        # stationarity of each returned block at its multiplier
        eff = network.effective_channels(ch, phase)
        a_bs, _ = wmmse.build_a_matrices(ch, phase, aux)
        lam = solves[0].multiplier
        resid = a_bs[0] @ new.f_dl[0, 0] + lam * new.f_dl[0, 0] \
            - eff.db[0, 0, 0].conj().T @ aux.u_dl[0, 0] @ aux.w_dl[0, 0]
        assert np.max(np.abs(resid)) <= 1e-8 * max(1.0, np.max(np.abs(new.f_dl)))
        return f"objective {before:.4f} -> {after:.4f}"

    check("precoder block decreases the objective", chk_precoder_update)

    def chk_bisection():
        for _ in range(20):
            n = 6
            z = rng.uniform(0.0, 2.0, n)
            vals = np.sort(rng.uniform(0.0, 3.0, n))
            budget = float(rng.uniform(0.1, 2.0))
            fn = lambda lam: wmmse.power_of_multiplier(z, vals, lam)
            ms = wmmse.bisection_solve(fn, budget,
                                       bracket=(0.0, np.sqrt(z.sum() / budget)))
            if ms.multiplier == 0.0:
                assert ms.power_watt <= budget
            else:
                assert abs(ms.power_watt - budget) <= 1e-6 * budget
        # analytic spot check: f(lam) = 1/lam^2, budget 1 -> lam = 1
        ms = wmmse.bisection_solve(
            lambda lam: wmmse.power_of_multiplier(np.ones(1), np.zeros(1), lam),
            1.0, bracket=(0.0, 4.0))
        assert abs(ms.multiplier - 1.0) <= 1e-5

    check("power bisection meets the budget", chk_bisection)

    # -- phase block -----------------------------------------------------------

    def chk_quadratic_form():
        ch = _synthetic(rng, bd=2, bu=2, mbt=4, mur=3, mut=4, mbr=3, kd=2, ku=2)
        prec, phase = _feasible_point(rng, ch)
        aux = wmmse.update_auxiliaries(ch, prec, phase)
        qf = phase_opt.build_quadratic_form(ch, prec, aux)
        assert np.max(np.abs(qf.xi - qf.xi.conj().T)) <= 1e-10
        worst = 0.0
        for _ in range(6):
            st = network.PhaseState(rng.uniform(0, 2 * np.pi, ch.ris_elements))
            direct = wmmse.weighted_mse_objective(ch, st, aux, prec)
            model = qf.value(st.phi)
            worst = max(worst, abs(model - direct) / max(1.0, abs(direct)))
        assert worst <= 1e-8, worst
        ghost = dataclasses.replace(
            ch, g_br=np.zeros_like(ch.g_br), g_dr=np.zeros_like(ch.g_dr),
            g_rb=np.zeros_like(ch.g_rb), g_ru=np.zeros_like(ch.g_ru))
        qz = phase_opt.build_quadratic_form(ghost, prec, aux)
        assert np.all(qz.xi == 0) and np.all(qz.c == 0)
        return f"max rel dev {worst:.1e}"

    check("phase quadratic model matches the objective", chk_quadratic_form)

    def chk_gradients():
        m = 5
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        qf = phase_opt.QuadraticForm(
            xi=0.5 * (a + a.conj().T),
            c=rng.standard_normal(m) + 1j * rng.standard_normal(m))
        theta = rng.uniform(0, 2 * np.pi, m)
        phi = np.exp(1j * theta)
        g_phi = phase_opt.euclidean_gradient_phi(qf, phi)
        h = 1e-6
        for _ in range(8):
            d = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            fd = (qf.value(phi + h * d) - qf.value(phi - h * d)) / (2 * h)
            an = float(np.real(np.vdot(g_phi, d)))
            assert abs(fd - an) <= 1e-5 * max(1.0, abs(an)), (fd, an)
        g_th = phase_opt.sca_gradient_theta(qf, theta)
        for i in range(m):
            e = np.zeros(m)
            e[i] = 1.0
            fd = (qf.value(np.exp(1j * (theta + h * e)))
                  - qf.value(np.exp(1j * (theta - h * e)))) / (2 * h)
            assert abs(fd - g_th[i]) <= 1e-5 * max(1.0, abs(g_th[i]))

    check("gradients match finite differences", chk_gradients)

    def chk_manifold_ops():
        m = 6
        phi = np.exp(1j * rng.uniform(0, 2 * np.pi, m))
        eta = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        p = phase_opt.riemannian_project(eta, phi)
        p2 = phase_opt.riemannian_project(p, phi)
        assert np.max(np.abs(p - p2)) <= 1e-12
        assert np.max(np.abs(np.real(p.conj() * phi))) <= 1e-12
        assert np.max(np.abs(phase_opt.riemannian_project(phi, phi))) <= 1e-12
        r = phase_opt.retract(2.5 * phi)
        assert np.max(np.abs(r - phi)) <= 1e-12
        try:
            phase_opt.retract(np.array([1.0 + 0j, 0.0]))
        except ValueError:
            return
        raise AssertionError("zero entry retraction accepted")

    check("tangent projection and retraction", chk_manifold_ops)

    def chk_minimizers():
        qf1 = phase_opt.QuadraticForm(xi=np.zeros((1, 1)), c=np.array([-1.0]))
        res = phase_opt.ccm_minimize(qf1, np.exp(1j * np.array([2.0])))
        assert abs(res.phi[0] - 1.0) <= 1e-4 and abs(res.f_final + 2.0) <= 1e-6
        res = phase_opt.sca_minimize(qf1, np.array([2.0]))
        assert abs(res.f_final + 2.0) <= 1e-6
        m = 4
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        qf = phase_opt.QuadraticForm(
            xi=0.5 * (a + a.conj().T),
            c=rng.standard_normal(m) + 1j * rng.standard_normal(m))
        phi0 = np.exp(1j * rng.uniform(0, 2 * np.pi, m))
        r1 = phase_opt.ccm_minimize(qf, phi0, tol=1e-9, max_iter=2000)
        f1 = [x[1] for x in r1.trace]
        assert all(b <= a + 1e-12 for a, b in zip(f1, f1[1:]))
        r2 = phase_opt.sca_minimize(qf, np.angle(phi0), tol=1e-9, max_iter=2000)
        f2 = [x[1] for x in r2.trace]
        assert all(b <= a + 1e-12 for a, b in zip(f2, f2[1:]))
        return f"ccm {r1.f_final:.6f}, sca {r2.f_final:.6f}"

    check("both phase minimizers descend", chk_minimizers)

    # -- solver and harness ----------------------------------------------------

    def chk_solver():
        ch = _synthetic(rng, m=3)
        cfg = solver.SolverConfig(phase_algorithm="ccm", outer_max_iter=40)
        rep = solver.solve(ch, cfg, seed=5)
        tr = rep.obj_trace
        assert all(b >= a - 1e-8 * max(1.0, abs(a))
                   for a, b in zip(tr, tr[1:])), "objective not monotone"
        rep.precoders.check_budgets(ch.power_bs_watt, ch.power_ue_watt)
        rep2 = solver.solve(ch, cfg, seed=5)
        assert rep.obj_trace == rep2.obj_trace
        zero = dataclasses.replace(
            ch, h_db=np.zeros_like(ch.h_db), h_bb=np.zeros_like(ch.h_bb),
            h_bu=np.zeros_like(ch.h_bu), h_du=np.zeros_like(ch.h_du),
            g_br=np.zeros_like(ch.g_br), g_dr=np.zeros_like(ch.g_dr),
            g_rb=np.zeros_like(ch.g_rb), g_ru=np.zeros_like(ch.g_ru))
        repz = solver.solve(zero, cfg, seed=5)
        assert repz.rates.sum_rate == 0.0 and repz.outer_iterations <= 2
        return f"final rate {rep.rates.sum_rate:.3f} bit/s/Hz"

    check("alternating solver basics", chk_solver)

    def chk_harness():
        cfg = dataclasses.replace(
            default_config(), ris_elements=3, users_per_cell_dl=1,
            users_per_cell_ul=1, bs_tx_antennas=3, ue_tx_antennas=3,
            streams_dl=1, streams_ul=1)
        spec = harness.SweepSpec(
            param="ris_elements", values=[2, 3], realizations=2,
            base_config=cfg, base_seed=11,
            schemes=[harness.Scheme.FD_NO_RIS],
            solver=solver.SolverConfig(outer_max_iter=15))
        table = harness.run_sweep(spec)
        assert len(table.rows) == 4
        assert not table.errors()
        with tempfile.TemporaryDirectory() as td:
            p = Path(td) / "t.csv"
            table.write_csv(p)
            back = harness.ResultTable.read_csv(p)
            assert [r.sum_rate_bps_hz for r in back.rows] == \
                [r.sum_rate_bps_hz for r in table.rows]

    check("sweep produces a full result table", chk_harness)

    return results


def main_validate(stream) -> int:
    """Print one line per check; 0 if everything passed, else nonzero."""
    results = run_validation()
    failed = 0
    for name, ok, detail in results:
        mark = "ok  " if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        print(f"  {mark}  {name}{suffix}", file=stream)
        failed += 0 if ok else 1
    total = len(results)
    print(f"{total - failed}/{total} checks passed", file=stream)
    return 0 if failed == 0 else 1
