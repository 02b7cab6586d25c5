"""Reference problems with closed-form answers, shared by unit and acceptance tests."""

import numpy as np

from surfbridge.bridge import BridgeSchedule, bridge_reverse_sample

# one surface point: U0 ~ N(PRIOR_MEAN, PRIOR_STD^2) per coordinate, UT fixed
PRIOR_MEAN = np.array([0.7, -0.4, 0.2])
PRIOR_STD = 0.3
UT = np.array([[1.5, 0.5, -1.0]])


def gaussian_bridge_score(U, t, sched=BridgeSchedule()):
    """Exact ``grad log q(U_t | U_T)`` for the Gaussian prior above."""
    rho = t / sched.T
    mean = (1 - rho) * PRIOR_MEAN + rho * UT
    var = (1 - rho) ** 2 * PRIOR_STD**2 + sched.c * t * (1 - rho)
    return -(U - mean) / var


def endpoint_errors(steps_list, n_paths=1000, fine=4000, seed=0):
    """Mean error and coupled strong error of the reverse sampler.

    All runs share one Brownian path per sample, drawn on a ``fine`` grid and
    summed in blocks for coarser grids; the strong error is the RMS distance
    to the ``fine``-step endpoint.
    """
    rng = np.random.default_rng(seed)
    sched = BridgeSchedule()
    z = rng.standard_normal((fine, n_paths, 3))
    UT_all = np.repeat(UT, n_paths, axis=0)

    def run(steps):
        r = fine // steps
        blocks = z.reshape(steps, r, n_paths, 3).sum(1) / np.sqrt(r)
        return bridge_reverse_sample(UT_all, gaussian_bridge_score, steps, sched, rng, noise=blocks[: steps - 1])

    ref = run(fine)
    out = {}
    for steps in steps_list:
        U = run(steps)
        out[steps] = {
            "mean_error": float(np.linalg.norm(U.mean(0) - PRIOR_MEAN)),
            "std": float(U.std(0).mean()),
            "strong_error": float(np.sqrt(np.mean(np.sum((U - ref) ** 2, axis=1)))),
        }
    return out
