import numpy as np
import pytest

from spinmacro.errors import ValidationError
from spinmacro.lindblad import (Channel, DickeState, LindbladSpec, dicke_embed,
                                dicke_evolve, dicke_ghz, dicke_ground,
                                dicke_measures, evolve, lindblad_rhs)
from spinmacro.macromeasure import measure_F, measure_I
from spinmacro.spincore import (DensityMatrix, DirectionField,
                                SystemDescriptor, ghz_state, random_density)

DECAY = LindbladSpec(rabi_frequency=0.0, dissipation_rate=1.0)


def all_down(n: int) -> DensityMatrix:
    v = np.zeros(2**n)
    v[-1] = 1.0
    return DensityMatrix(SystemDescriptor(n, 1), np.outer(v, v))


class TestSpecTypes:
    def test_negative_rate_rejected(self):
        with pytest.raises(ValidationError):
            LindbladSpec(dissipation_rate=-0.5)

    def test_dephasing_needs_field(self):
        with pytest.raises(ValidationError):
            LindbladSpec(channel=Channel.Dephasing)

    def test_dicke_state_validation(self):
        with pytest.raises(ValidationError):
            DickeState(4, np.eye(5))  # trace 5


class TestRhs:
    def test_steady_state_annihilated(self):
        rhs = lindblad_rhs(all_down(4), DECAY)
        assert np.abs(rhs).max() < 1e-14

    def test_single_qubit_decay_direction(self):
        up = np.zeros(2)
        up[0] = 1
        rho = DensityMatrix(SystemDescriptor(1, 1), np.outer(up, up))
        rhs = lindblad_rhs(rho, DECAY)
        assert np.allclose(rhs, np.diag([-1.0, 1.0]))

    def test_traceless_and_hermitian(self):
        rho = random_density(SystemDescriptor(3, 1), 5, 3)
        rhs = lindblad_rhs(rho, LindbladSpec(rabi_frequency=0.7,
                                             dissipation_rate=0.9))
        assert abs(np.trace(rhs)) < 1e-12
        assert np.abs(rhs - rhs.conj().T).max() < 1e-12

    def test_dephasing_channel(self):
        fld = DirectionField.uniform(2, [0, 0, 1])
        spec = LindbladSpec(channel=Channel.Dephasing, dephasing_field=fld)
        rho = DensityMatrix(SystemDescriptor(2, 1),
                            np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex))
        assert np.abs(lindblad_rhs(rho, spec)).max() < 1e-14


class TestEvolve:
    def test_frozen_without_generator(self):
        rho = ghz_state(3)
        spec = LindbladSpec(rabi_frequency=0.0, dissipation_rate=0.0)
        traj = evolve(rho, spec, [0.0, 0.5, 1.0], dt=0.01)
        assert np.abs(traj.states[-1].entries - rho.entries).max() < 1e-12

    def test_single_qubit_closed_form(self):
        up = np.zeros(2)
        up[0] = 1
        rho = DensityMatrix(SystemDescriptor(1, 1), np.outer(up, up))
        tg = np.linspace(0, 2, 9)
        traj = evolve(rho, DECAY, tg, dt=0.005)
        for t, s in zip(tg, traj.states):
            assert abs(s.entries[1, 1].real - (1 - np.exp(-t))) < 1e-8

    def test_ghz_purity_dip_and_recovery(self):
        traj = evolve(ghz_state(8), DECAY, [0.0, 0.2, 5.0])
        assert traj.purity[0] > 1 - 1e-10
        assert traj.purity[1] < 0.7
        assert traj.purity[2] > 0.95

    def test_dt_stability_bound_enforced(self):
        with pytest.raises(ValidationError):
            evolve(ghz_state(3), DECAY, [0.0, 1.0], dt=0.5)

    def test_trajectory_csv(self, tmp_path):
        traj = evolve(ghz_state(2), DECAY, [0.0, 0.5])
        p = tmp_path / "traj.csv"
        traj.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "t,purity,I,F"
        assert len(lines) == 3


class TestDicke:
    def test_ghz_embedding(self):
        emb = dicke_embed(dicke_ghz(6))
        assert np.abs(emb.entries - ghz_state(6).entries).max() < 1e-14

    def test_cross_path_agreement_n8(self):
        tg = np.array([0.0, 0.25, 0.5, 1.0])
        dtraj = dicke_evolve(dicke_ghz(8), DECAY, tg, compute_measures=False)
        ftraj = evolve(dicke_embed(dicke_ghz(8)), DECAY, tg)
        for ds, fs in zip(dtraj.states, ftraj.states):
            assert np.abs(dicke_embed(ds).entries - fs.entries).max() < 1e-8

    def test_steady_state(self):
        tg = np.array([0.0, 20.0])
        traj = dicke_evolve(dicke_ghz(10), DECAY, tg, compute_measures=False)
        expect = dicke_ground(10).entries
        assert np.abs(traj.states[-1].entries - expect).max() < 1e-8

    def test_rejects_dephasing_channel(self):
        fld = DirectionField.uniform(2, [0, 0, 1])
        spec = LindbladSpec(channel=Channel.Dephasing, dephasing_field=fld)
        with pytest.raises(ValidationError):
            dicke_evolve(dicke_ghz(4), spec, [0.0, 1.0])


class TestDickeMeasures:
    @pytest.mark.parametrize("n", [4, 10, 50])
    def test_ghz_value(self, n):
        iv, fv = dicke_measures(dicke_ghz(n))
        assert abs(iv - n) < 1e-6 and abs(fv - n) < 1e-6

    @pytest.mark.parametrize("n", [4, 10, 50])
    def test_steady_value(self, n):
        iv, fv = dicke_measures(dicke_ground(n))
        assert abs(iv - 1) < 1e-8 and abs(fv - 1) < 1e-8

    def test_partially_decayed_matches_full_space(self):
        tg = np.array([0.0, 0.2])
        traj = dicke_evolve(dicke_ghz(8), DECAY, tg)
        full = dicke_embed(traj.states[-1])
        iv = measure_I(full, restarts=30, seed=0).value
        fv = measure_F(full, restarts=30, seed=0).value
        assert abs(traj.i_values[-1] - iv) < 1e-6
        assert abs(traj.f_values[-1] - fv) < 1e-6


class TestTrajectoryShape:
    def test_fig2_shape_n50(self):
        tg = np.linspace(0.0, 1.0, 51)
        traj = dicke_evolve(dicke_ghz(50), DECAY, tg)
        assert abs(traj.i_values[0] - 50) < 1e-6
        assert abs(traj.f_values[0] - 50) < 1e-6
        kmin = int(np.argmin(traj.i_values))
        assert traj.i_values[kmin] < 1
        assert 0.08 <= tg[kmin] <= 0.22
        late = dicke_evolve(dicke_ghz(50), DECAY, [0.0, 5.0])
        assert abs(late.i_values[-1] - 1) < 0.05
        assert abs(late.f_values[-1] - 1) < 0.05

    def test_pure_product_floor(self):
        for n in (2, 4, 6):
            iv, fv = dicke_measures(dicke_ground(n))
            assert iv >= 1 - 1e-8 and fv >= 1 - 1e-8


class TestDephasingRateConsistency:
    def test_euler_step_rate(self):
        from spinmacro.macromeasure import dephasing_purity_rate
        from spinmacro.spincore import (OperatorKind, collective_operator,
                                        stream_rng)
        dt = 1e-6
        for stream in range(20):
            n = 2 + stream % 2
            rho = random_density(SystemDescriptor(n, 1), 3, 91, stream=stream)
            fld = DirectionField.random(n, stream_rng(92, stream))
            a = collective_operator(rho.descriptor, fld, OperatorKind.SpinOps)
            r = rho.entries
            lind = a @ r @ a - 0.5 * (a @ a @ r + r @ a @ a)
            r1 = r + dt * lind
            p0 = np.trace(r @ r).real
            p1 = np.trace(r1 @ r1).real
            fd = -(np.log(p1) - np.log(p0)) / (2 * n * 0.5 * dt)
            rate = dephasing_purity_rate(rho, fld)
            assert abs(rate - fd) / max(abs(fd), 1e-12) < 1e-4
