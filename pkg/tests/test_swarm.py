import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import invariant_suite
import oracles
from srswarm.landscape import Domain2D, GridSpec, LandscapeGrid
from srswarm.swarm import (
    STAY,
    AltitudeNormalizer,
    AntState,
    SwarmParams,
    SwarmState,
    decay_and_survive,
    deposit,
    direction_weight,
    evaporate,
    init_swarm,
    neighbor,
    reproduction_prob,
    step_ant,
    tick,
    transition_probs,
    try_reproduce,
    weight_pheromone,
)

DEFAULT = SwarmParams()
UNIFORM_WEIGHTS = SwarmParams(weights=(1, 1, 1, 1, 1))


def make_swarm(cells, shape=(5, 5), seed=0, energy=1.0) -> SwarmState:
    capacity = shape[0] * shape[1]
    rows = np.zeros(capacity, dtype=np.int64)
    cols = np.zeros(capacity, dtype=np.int64)
    theta = np.zeros(capacity, dtype=np.int64)
    energies = np.zeros(capacity)
    occ = np.zeros(shape, dtype=bool)
    for i, (r, c) in enumerate(cells):
        rows[i], cols[i], energies[i] = r, c, energy
        occ[r, c] = True
    return SwarmState(shape, rows, cols, theta, energies, len(cells), occ,
                      np.zeros(shape), AltitudeNormalizer(), np.random.default_rng(seed))


def ring(center, shape, dirs):
    return [neighbor(center[0], center[1], d, shape) for d in dirs]


# -- weighting ----------------------------------------------------------------

def test_weight_pheromone_examples():
    assert weight_pheromone(0.0, 3.5, 0.2) == 1.0
    assert weight_pheromone(7.3, 0.0, 0.2) == 1.0
    assert weight_pheromone(1.0, 3.5, 0.2) == pytest.approx(oracles.pheromone_weight(1, 3.5, 0.2), abs=1e-12)
    assert weight_pheromone(1.0, 3.5, 0.2) == pytest.approx((1 + 1 / 1.2) ** 3.5, abs=1e-12)


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 6), st.floats(0.01, 2))
def test_weight_pheromone_monotone_and_bounded(s1, s2, beta, gamma):
    lo, hi = sorted((s1, s2))
    w_lo = weight_pheromone(lo, beta, gamma)
    w_hi = weight_pheromone(hi, beta, gamma)
    assert 1.0 <= w_lo <= w_hi * (1 + 1e-12)
    assert w_hi <= (1 + 1 / gamma) ** beta * (1 + 1e-12)


def test_direction_weight():
    assert direction_weight(0) == 1.0
    assert direction_weight(4) == 1 / 20
    assert direction_weight(2) == 1 / 4
    for bad in (-1, 5):
        with pytest.raises(ValueError):
            direction_weight(bad)


# -- transitions ---------------------------------------------------------------

def test_uniform_field_and_weights_give_one_eighth():
    occ = np.zeros((5, 5), dtype=bool)
    occ[2, 2] = True
    probs = transition_probs(AntState(2, 2, 3), np.full((5, 5), 0.4), occ, UNIFORM_WEIGHTS)
    assert probs[:8] == pytest.approx([1 / 8] * 8, abs=1e-15)
    assert probs[STAY] == 0.0


def test_boxed_in_ant_stays():
    occ = np.ones((3, 3), dtype=bool)
    probs = transition_probs(AntState(1, 1, 0), np.zeros((3, 3)), occ)
    assert probs[STAY] == 1.0 and probs[:8].sum() == 0.0
    rng = np.random.default_rng(0)
    moved = step_ant(AntState(1, 1, 5), probs, occ, rng)
    assert (moved.row, moved.col, moved.theta) == (1, 1, 5)


def test_transition_matches_brute_force():
    shape = (6, 6)
    sigma = np.zeros(shape)
    ant = AntState(0, 0, 2)  # corner: neighbors wrap around the torus
    cells = ring((0, 0), shape, range(8))
    sigma[cells[1]] = 5.0
    sigma[cells[6]] = 0.7
    occ = np.zeros(shape, dtype=bool)
    occ[0, 0] = True
    occ[cells[4]] = True
    got = transition_probs(ant, sigma, occ, DEFAULT)
    want = oracles.transition_eq([sigma[c] for c in cells], [not occ[c] for c in cells],
                                 ant.theta, 3.5, 0.2, DEFAULT.weights)
    assert got[:8] == pytest.approx(want, abs=1e-12)
    assert got[4] == 0.0 and got[STAY] == 0.0
    assert np.argmax(got) == 1


@settings(max_examples=60)
@given(st.lists(st.floats(0, 50), min_size=8, max_size=8),
       st.lists(st.booleans(), min_size=8, max_size=8), st.integers(0, 7))
def test_transition_normalized_and_excludes_occupied(sig, occupied, theta):
    shape = (5, 5)
    sigma = np.zeros(shape)
    occ = np.zeros(shape, dtype=bool)
    occ[2, 2] = True
    for d, cell in enumerate(ring((2, 2), shape, range(8))):
        sigma[cell] = sig[d]
        occ[cell] = occupied[d]
    probs = transition_probs(AntState(2, 2, theta), sigma, occ)
    assert abs(probs.sum() - 1.0) <= 1e-12 and np.all(probs >= 0)
    for d in range(8):
        if occupied[d]:
            assert probs[d] == 0.0
    assert (probs[STAY] == 1.0) == all(occupied)


@settings(max_examples=60)
@given(st.floats(0, 50), st.floats(0, 50), st.integers(0, 7))
def test_monotone_attraction(a, b, theta):
    # the two cells 45 degrees either side of the heading share a turn weight
    shape = (5, 5)
    sigma = np.zeros(shape)
    left, right = (theta - 1) % 8, (theta + 1) % 8
    cells = ring((2, 2), shape, range(8))
    sigma[cells[left]], sigma[cells[right]] = a, b
    occ = np.zeros(shape, dtype=bool)
    probs = transition_probs(AntState(2, 2, theta), sigma, occ)
    if a >= b:
        assert probs[left] >= probs[right]
    else:
        assert probs[left] <= probs[right]


def test_step_ant_degenerate_and_updates_occupancy():
    occ = np.zeros((4, 4), dtype=bool)
    occ[0, 0] = True
    probs = np.zeros(9)
    probs[7] = 1.0  # north-west from the corner wraps to (3, 3)
    moved = step_ant(AntState(0, 0, 2), probs, occ, np.random.default_rng(1))
    assert (moved.row, moved.col, moved.theta) == (3, 3, 7)
    assert occ[3, 3] and not occ[0, 0]


def test_step_ant_sampling_frequencies():
    probs = np.array([0.05, 0.3, 0.0, 0.15, 0.1, 0.2, 0.15, 0.05, 0.0])
    occ = np.zeros((5, 5), dtype=bool)
    rng = np.random.default_rng(99)
    counts = np.zeros(9, dtype=int)
    for _ in range(100_000):
        moved = step_ant(AntState(2, 2, 0), probs, occ.copy(), rng)
        d = 8 if (moved.row, moved.col) == (2, 2) else moved.theta
        counts[d] += 1
    assert counts[2] == 0 and counts[8] == 0
    assert oracles.multinomial_ok(counts, probs)


# -- deposition and evaporation -------------------------------------------------

def grid_of(values):
    return LandscapeGrid.from_values(np.asarray(values, dtype=float))


def test_deposit_flat_landscape_is_eta():
    sigma = np.zeros((3, 3))
    norm = AltitudeNormalizer()
    grid = grid_of(np.full((3, 3), 2.0))
    for cell in [(0, 0), (1, 2), (2, 1)]:
        assert deposit(AntState(*cell, 0), sigma, norm, grid) == DEFAULT.eta
    assert sigma.sum() == pytest.approx(3 * DEFAULT.eta)


def test_deposit_examples():
    values = np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 2.0], [0.0, 1.0, 2.0]])
    grid = grid_of(values)
    norm = AltitudeNormalizer()
    norm.observe([0.0, 2.0])
    sigma = np.zeros((3, 3))
    # minimizing: the colony's lowest altitude scores the full ratio
    assert deposit(AntState(0, 0, 0), sigma, norm, grid) == pytest.approx(0.07 + 1.93)
    assert deposit(AntState(0, 1, 0), sigma, norm, grid) == pytest.approx(0.07 + 1.93 * 0.5)
    assert deposit(AntState(0, 2, 0), sigma, norm, grid) == pytest.approx(0.07)
    maxi = SwarmParams(sense="max")
    assert deposit(AntState(1, 2, 0), sigma, norm, grid, maxi) == pytest.approx(2.0)
    for z in (0.0, 1.0, 2.0):
        want = oracles.deposit_eq(z, 0.0, 2.0, 0.07, 1.93)
        assert deposit(AntState(2, int(z), 0), np.zeros((3, 3)), norm, grid) == pytest.approx(want, abs=1e-12)


def test_deposit_registers_altitude():
    norm = AltitudeNormalizer()
    assert not norm.seen and norm.delta_max == 0.0
    deposit(AntState(0, 0, 0), np.zeros((3, 3)), norm, grid_of(np.arange(9.0).reshape(3, 3)))
    assert norm.z_min_seen == norm.z_max_seen == 0.0
    norm.reset()
    assert not norm.seen


def test_evaporate():
    sigma = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(evaporate(sigma.copy(), 0.0), sigma)
    single = np.zeros((3, 3))
    single[1, 1] = 1.0
    for _ in range(100):
        evaporate(single, 0.015)
    assert single[1, 1] == pytest.approx(0.985**100, rel=1e-12)
    before = sigma.sum()
    assert evaporate(sigma, 0.3).sum() == pytest.approx(0.7 * before, rel=1e-14)
    with pytest.raises(ValueError):
        evaporate(sigma, 1.0)


# -- reproduction ----------------------------------------------------------------

def test_reproduction_prob_examples():
    assert reproduction_prob(4, 2.0, 2.0) == 1.0
    assert reproduction_prob(0, 1.0, 1.0) == 0.0
    assert reproduction_prob(8, 1.0, 1.0) == 0.0
    assert reproduction_prob(3, 0.5, 1.0) == pytest.approx(0.375)
    assert reproduction_prob(4, 0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        reproduction_prob(9, 1.0, 1.0)


@given(st.integers(0, 8), st.floats(0, 100), st.floats(0, 100))
def test_reproduction_prob_is_a_probability(n, dr, dmax):
    assert 0.0 <= reproduction_prob(n, dr, dmax) <= 1.0


def _best_cell_setup(n_neighbors, seed=0):
    """Ant at (2, 2) of a 5x5 grid on the colony-best altitude, with the first
    ``n_neighbors`` Moore cells occupied."""
    cells = [(2, 2)] + ring((2, 2), (5, 5), range(n_neighbors))
    swarm = make_swarm(cells, seed=seed)
    swarm.normalizer.observe([0.0, 1.0])
    return swarm, grid_of(np.zeros((5, 5)))


def test_isolated_ant_never_reproduces():
    swarm, grid = _best_cell_setup(0)
    for _ in range(200):
        assert try_reproduce(AntState(2, 2, 0), swarm, grid) is None
    assert swarm.count == 1


def test_single_free_cell_gets_the_child():
    swarm, grid = _best_cell_setup(7)
    params = SwarmParams(table=(0, 1, 1, 1, 1, 1, 1, 1, 0))
    child = try_reproduce(AntState(2, 2, 0), swarm, grid, params)
    free = neighbor(2, 2, 7, (5, 5))
    assert (child.row, child.col, child.energy) == (*free, 1.0)
    assert swarm.count == 9 and swarm.occupancy[free]
    # now boxed in: no room for a second child
    assert try_reproduce(AntState(2, 2, 0), swarm, grid, params) is None


def test_reproduction_frequency():
    cells = [(2, 2)] + ring((2, 2), (5, 5), range(3))
    swarm = make_swarm(cells, seed=11)
    swarm.normalizer.observe([0.0, 1.0])
    grid = grid_of(np.full((5, 5), 0.5))  # ratio 0.5 with n = 3: P* = 0.375
    hits = 0
    trials = 10_000
    for _ in range(trials):
        child = try_reproduce(AntState(2, 2, 0), swarm, grid)
        if child is not None:
            hits += 1
            swarm.count -= 1
            swarm.occupancy[child.row, child.col] = False
    assert oracles.binomial_ok(hits, trials, 0.375)


# -- energy ------------------------------------------------------------------------

def test_seven_step_old_ant_has_point_three():
    ant = AntState(0, 0, 0)
    rng = np.random.default_rng(0)
    for _ in range(7):
        assert decay_and_survive(ant, 0.1, rng, stochastic=False)
    assert ant.energy == pytest.approx(0.3)
    survived = sum(decay_and_survive(AntState(0, 0, 0, 0.4), 0.1, rng) for _ in range(10_000))
    assert oracles.binomial_ok(survived, 10_000, 0.3)


def test_full_decay_kills():
    rng = np.random.default_rng(0)
    assert not any(decay_and_survive(AntState(0, 0, 0, 1.0), 1.0, rng) for _ in range(100))
    assert not decay_and_survive(AntState(0, 0, 0, 1.0), 1.0, rng, stochastic=False)
    ant = AntState(0, 0, 0)
    alive = [decay_and_survive(ant, 0.1, rng, stochastic=False) for _ in range(10)]
    assert alive == [True] * 9 + [False]


def test_survival_frequency_at_half_energy():
    rng = np.random.default_rng(5)
    survived = sum(decay_and_survive(AntState(0, 0, 0, 0.6), 0.1, rng) for _ in range(10_000))
    assert oracles.binomial_ok(survived, 10_000, 0.5)


# -- whole swarm ---------------------------------------------------------------------

def test_params_validation():
    for bad in (dict(k=1.0), dict(k=-0.1), dict(delta_e=0.0), dict(rho=1.5), dict(beta=-1),
                dict(weights=(1, 2, 1, 1, 1)), dict(weights=(1, 1, 1, 1, 0)),
                dict(table=(0, 0.3, 0.5, 0.75, 1, 0.75, 0.5, 0.25, 0)),
                dict(table=(0.1, 0.25, 0.5, 0.75, 1, 0.75, 0.5, 0.25, 0.1)),
                dict(sense="up"), dict(survival="sometimes")):
        with pytest.raises(ValueError):
            SwarmParams(**bad)


def test_init_swarm():
    spec = GridSpec(100, 100, Domain2D(-2, 2, -2, 2))
    swarm = init_swarm(spec, SwarmParams(), np.random.default_rng(0))
    assert swarm.count == 3333
    assert swarm.occupancy.sum() == 3333
    assert not swarm.normalizer.seen and not swarm.pheromone.any()
    assert np.all(swarm.energy[:3333] == 1.0)
    swarm.check()
    small = GridSpec(6, 4, Domain2D(0, 1, 0, 1))
    full = init_swarm(small, SwarmParams(rho=1.0), np.random.default_rng(0))
    assert full.count == 24 and full.occupancy.all()


def test_empty_tick_only_evaporates():
    swarm = make_swarm([])
    swarm.pheromone[1, 1] = 2.0
    tick(swarm, grid_of(np.zeros((5, 5))), SwarmParams(k=0.5))
    assert swarm.pheromone[1, 1] == 1.0 and swarm.pheromone.sum() == 1.0
    assert swarm.count == 0 and swarm.t == 1


def test_single_ant_on_flat_field_lays_eta_per_visit():
    spec = GridSpec(7, 7, Domain2D(0, 1, 0, 1))
    params = SwarmParams(k=0.0, rho=1 / 49, delta_e=0.01, survival="deterministic")
    swarm = init_swarm(spec, params, np.random.default_rng(3))
    grid = grid_of(np.full((7, 7), 4.2))
    visits = np.zeros((7, 7))
    for _ in range(30):
        tick(swarm, grid, params)
        r, c = swarm.positions
        visits[r[0], c[0]] += 1
    assert swarm.count == 1
    assert np.allclose(swarm.pheromone, params.eta * visits, atol=1e-14)


def test_children_first_act_next_step():
    # every ant with a neighbor reproduces for certain; children must not
    # move or deposit in the step they are born
    params = SwarmParams(k=0.0, eta=0.0, p=1.0, delta_e=0.5, survival="deterministic",
                         table=(0, 1, 1, 1, 1, 1, 1, 1, 0))
    swarm = make_swarm([(3, 3), (3, 4)], shape=(8, 8), seed=2)
    swarm.normalizer.observe([0.0, 1.0])
    tick(swarm, grid_of(np.zeros((8, 8))), params)
    assert swarm.births >= 1
    assert swarm.pheromone.sum() == pytest.approx(2.0)  # two parents, ratio 1 each
    assert np.all(swarm.energy[: swarm.count] == 0.5)
    swarm.check()


def test_same_seed_same_trajectory():
    spec = GridSpec(12, 12, Domain2D(-2, 2, -2, 2))
    values = np.random.default_rng(0).normal(size=(12, 12))
    grid = grid_of(values)

    def run(seed):
        swarm = init_swarm(spec, SwarmParams(rho=0.2), np.random.default_rng(seed))
        trace = []
        for _ in range(20):
            tick(swarm, grid, SwarmParams())
            trace.append((swarm.count, swarm.rows[: swarm.count].tobytes(),
                          swarm.pheromone.tobytes()))
        return trace

    assert run(1) == run(1)
    assert run(1) != run(2)


def test_invariants_on_random_small_instances():
    report = invariant_suite.run_trials(n_trials=15, seed=1)
    assert report.ok, report.failures[:5]
