"""Independent reference implementations used by the unit tests.

Each oracle is written the slow, obvious way so it shares no code path with
the library function it checks.
"""

import itertools
from typing import Callable, Dict, List, Sequence, Set, Tuple

import numpy as np


def brute_force_edges(labels: Sequence[int], gamma: float) -> Dict[Tuple[int, int], float]:
    """Weighted non-self-loop edges of a label sequence by the pair rule.

    A pair i < j is skipped when adjacent (the temporal edge covers it). It is
    positive when every frame from i to j has the same label, and negative
    when j starts a run and i belongs to the run right before it.
    """
    n = len(labels)
    edges = {(i, i + 1): 1.0 for i in range(n - 1)}
    for i in range(n):
        for j in range(i + 2, n):
            if labels[j - 1] != labels[i]:
                break
            edges[(i, j)] = 1.0 if labels[j] == labels[i] else gamma
    return edges


def random_run_labels(
    rng: np.random.Generator, max_frames: int, max_classes: int, max_run: int
) -> Tuple[int, ...]:
    """Label sequence built run by run, so long runs occur as well as short ones."""
    frames = int(rng.integers(1, max_frames + 1))
    classes = int(rng.integers(1, max_classes + 1))
    labels: List[int] = []
    while len(labels) < frames:
        label = int(rng.integers(classes))
        labels.extend([label] * int(rng.integers(1, max_run + 1)))
    return tuple(labels[:frames])


def scan_runs(labels: Sequence[int]) -> List[Tuple[int, int, int]]:
    runs = []
    for t, label in enumerate(labels):
        if t == 0 or label != labels[t - 1]:
            runs.append([label, t, t])
        else:
            runs[-1][2] = t
    return [tuple(r) for r in runs]


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        table[i][0] = i
    for j in range(len(b) + 1):
        table[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(table[i - 1][j] + 1, table[i][j - 1] + 1, table[i - 1][j - 1] + cost)
    return table[len(a)][len(b)]


def iou(a: Tuple[int, int, int], b: Tuple[int, int, int]) -> float:
    frames_a = set(range(a[1], a[2] + 1))
    frames_b = set(range(b[1], b[2] + 1))
    return len(frames_a & frames_b) / len(frames_a | frames_b)


def greedy_tp(pred_runs, gt_runs, threshold: float) -> int:
    """True positives of the sequential best-IoU matching."""
    used: Set[int] = set()
    tp = 0
    for p in pred_runs:
        candidates = [
            (iou(p, g), -k) for k, g in enumerate(gt_runs) if k not in used and g[0] == p[0]
        ]
        if candidates:
            best, neg_index = max(candidates)
            if best >= threshold:
                used.add(-neg_index)
                tp += 1
    return tp


def max_matching_tp(pred_runs, gt_runs, threshold: float) -> int:
    """Largest one-to-one matching of same-class pairs with IoU >= threshold."""
    pairs = [
        (i, k)
        for i, p in enumerate(pred_runs)
        for k, g in enumerate(gt_runs)
        if p[0] == g[0] and iou(p, g) >= threshold
    ]
    for size in range(min(len(pred_runs), len(gt_runs)), 0, -1):
        for subset in itertools.combinations(pairs, size):
            if len({i for i, _ in subset}) == size and len({k for _, k in subset}) == size:
                return size
    return 0


def sorted_topk_hit(scores: Sequence[float], true_class: int, k: int) -> bool:
    """Rank by descending score, smaller class id first on ties."""
    order = sorted(range(len(scores)), key=lambda c: (-scores[c], c))
    return true_class in order[:k]


def nll(log_probs: np.ndarray, labels: Sequence[int]) -> float:
    total = 0.0
    for i, label in enumerate(labels):
        total -= log_probs[i][label]
    return total / len(labels)


def kl_edge_loss(log_probs: np.ndarray, adj: np.ndarray, eps: float = 1e-8) -> float:
    """Summed row KL of target and predicted neighbourhoods over 2N."""
    n = adj.shape[0]
    probs = np.exp(log_probs)
    total = 0.0
    for i in range(n):
        target = [adj[i][j] + (1.0 if i == j else 0.0) for j in range(n)]
        target_sum = sum(target)
        agree = [float(np.dot(probs[i], probs[j])) + eps for j in range(n)]
        agree_sum = sum(agree)
        for j in range(n):
            p = target[j] / target_sum
            if p > 0:
                total += p * (np.log(p) - np.log(agree[j] / agree_sum))
    return total / (2.0 * n)


def central_difference(
    fn: Callable[[], float], tensor: np.ndarray, index: Tuple[int, ...], h: float = 1e-5
) -> float:
    """Numerical derivative of ``fn`` w.r.t. one entry of ``tensor`` (modified in place)."""
    original = tensor[index]
    tensor[index] = original + h
    upper = fn()
    tensor[index] = original - h
    lower = fn()
    tensor[index] = original
    return (upper - lower) / (2.0 * h)
