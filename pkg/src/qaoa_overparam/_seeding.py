import numpy as np


def derive_seed(*keys: int) -> int:
    """Order-independent 63-bit seed derived from a tuple of integer keys."""
    ss = np.random.SeedSequence([int(k) for k in keys] + [len(keys)])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
