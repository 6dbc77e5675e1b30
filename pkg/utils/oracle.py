import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from config import Config
from utils.action_space import ActionDims, BsRates, enumerate_actions, joint_user_rates
from utils.errors import OracleCapError
from utils.net_model import GlobalAllocation, NetworkScenario
from utils.task_model import delays_from_rates

logger = logging.getLogger(__name__)

CHUNK = 50_000


@dataclass(frozen=True)
class OracleResult:
    best_allocation: GlobalAllocation
    best_max_delay: float
    evaluated_count: int
    best_action_ids: tuple[int, ...]


def _tables(s: NetworkScenario, catalog_cap: int):
    catalog = enumerate_actions(s, cap=catalog_cap)
    tables = [BsRates(s, n, catalog) for n in range(s.n_bs)]
    ul = np.stack([t.table[0] for t in tables], axis=1)  # (A, N, M)
    dl = np.stack([t.table[1] for t in tables], axis=1)
    served = catalog.served_users()
    return catalog, ul, dl, served


def _scan(s: NetworkScenario, start: int, stop: int, catalog_cap: int, chunk: int = CHUNK) -> tuple[float, int, int]:
    """(best t_max, best flat index, feasible count) over flat joint indices [start, stop)"""
    catalog, ul, dl, served = _tables(s, catalog_cap)
    shape = (catalog.size,) * s.n_bs
    bs_axis = np.arange(s.n_bs)
    best, best_idx, count = math.inf, -1, 0
    for lo in range(start, stop, chunk):
        flat = np.arange(lo, min(lo + chunk, stop))
        ids = np.stack(np.unravel_index(flat, shape), axis=1)  # (C, N)
        srv = served[ids]  # (C, N, M)
        # one BS per user; joint actions that share a user are outside the feasible set
        feasible = (srv.sum(axis=1) <= 1).all(axis=1)
        if not feasible.any():
            continue
        ids, flat, srv = ids[feasible], flat[feasible], srv[feasible]
        ul_m, dl_m, _ = joint_user_rates(ul[ids, bs_axis], dl[ids, bs_axis], srv)
        delays, _ = delays_from_rates(s, ul_m, dl_m)
        t_max = delays.max(axis=1)
        count += len(flat)
        k = int(np.argmin(t_max))  # first minimum, so the smallest joint id on ties
        if best_idx < 0 or t_max[k] < best:
            best, best_idx = float(t_max[k]), int(flat[k])
    return best, best_idx, count


def solve_exhaustive(
    s: NetworkScenario,
    cap: int = Config.Harness.ORACLE_CAP,
    catalog_cap: int = Config.Harness.CATALOG_CAP,
    workers: int = 1,
    chunk: int = CHUNK,
) -> OracleResult:
    """Global minimum of t_max over the cross product of the per-BS catalogs.

    The joint index space is cut into at most `workers` contiguous parts, no
    more than one per `chunk` indices, scanned in parallel and reduced in
    index order.
    """
    if chunk < 1:
        raise ValueError(f"chunk must be positive, got {chunk}")
    dims = ActionDims.of(s)
    catalog = enumerate_actions(dims, cap=catalog_cap)
    total = catalog.size**s.n_bs
    if total > cap:
        raise OracleCapError(f"joint space of {total} actions exceeds the oracle cap of {cap}")

    n_parts = max(1, min(workers, math.ceil(total / chunk)))
    bounds = [(total * p // n_parts, total * (p + 1) // n_parts) for p in range(n_parts)]
    if n_parts == 1:
        parts = [_scan(s, 0, total, catalog_cap, chunk)]
    else:
        with ProcessPoolExecutor(max_workers=n_parts) as executor:
            futures = [executor.submit(_scan, s, lo, hi, catalog_cap, chunk) for lo, hi in bounds]
            parts = [f.result() for f in futures]

    best, best_idx, evaluated = math.inf, -1, 0
    # parts are in index order, so strict < keeps the smallest id on ties
    for value, idx, count in parts:
        evaluated += count
        if idx >= 0 and (value < best or best_idx < 0):
            best, best_idx = value, idx
    if best_idx < 0:
        raise OracleCapError("no feasible joint action found")

    ids = tuple(int(i) for i in np.unravel_index(best_idx, (catalog.size,) * s.n_bs))
    allocation = GlobalAllocation(tuple(catalog.allocation(a, s) for a in ids))
    logger.info(f"Oracle scanned {evaluated}/{total} joint actions in {n_parts} part(s), best t_max={best:.6g} s at {ids}")
    return OracleResult(allocation, best, evaluated, ids)
