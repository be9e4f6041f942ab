# SPDX-License-Identifier: MIT

import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed

import colorama
import numpy as np

verbosity = False


def eprint(*args, **kwargs):
    return print(*args, **kwargs, file=sys.stderr)


def log_info(msg):
    eprint("{}kerncoint{}: {}".format(colorama.Style.BRIGHT, colorama.Style.RESET_ALL, msg))


def log_verbose(msg):
    if verbosity:
        log_info(msg)


def log_warn(msg):
    eprint(
        "{}kerncoint{}: {}{}{}".format(
            colorama.Style.BRIGHT,
            colorama.Style.NORMAL,
            colorama.Fore.YELLOW,
            msg,
            colorama.Style.RESET_ALL,
        )
    )


def log_err(msg):
    eprint(
        "{}kerncoint{}: {}{}{}".format(
            colorama.Style.BRIGHT,
            colorama.Style.NORMAL,
            colorama.Fore.RED,
            msg,
            colorama.Style.RESET_ALL,
        ),
    )


def num_allocated_cpus():
    try:
        cpuset = os.sched_getaffinity(0)
    except AttributeError:
        # MacOS does not have CPU affinity.
        return None
    return len(cpuset)


def get_concurrency(cap=None):
    n = num_allocated_cpus()
    if n is None:
        # The best that we can do is returning the number of all CPUs.
        n = os.cpu_count() or 1
    if cap is not None:
        n = min(n, cap)
    return max(n, 1)


# Derives a 64-bit seed from a base seed and a tuple of nonnegative integer indices.
# The derivation does not depend on the order in which replicates are scheduled.
def derive_seed(base_seed, *indices):
    sequence = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(i) for i in indices))
    return int(sequence.generate_state(1, np.uint64)[0])


# Applies fn to every task and returns the results in task order.
# fn must be a module-level function so that worker processes can unpickle it.
def map_replicates(fn, tasks, threads=None):
    tasks = list(tasks)
    workers = min(get_concurrency(threads), len(tasks))
    if workers <= 1:
        return [fn(task) for task in tasks]
    results = [None] * len(tasks)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, task): i for i, task in enumerate(tasks)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results
