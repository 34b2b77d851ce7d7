"""Independent oracle for the constants frozen in the C++ tests.

Run: python3 tests/oracles/derive_constants.py
Uses mpmath (50 digits) and exact fractions; shares no code with the library.
"""
from fractions import Fraction as F
from itertools import product
import math

import mpmath as mp

mp.mp.dps = 50


def softmax(xs):
    es = [mp.e ** mp.mpf(x) for x in xs]
    s = sum(es)
    return [e / s for e in es]


def iou(a, b):
    ix = max(F(0), min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0]))
    iy = max(F(0), min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1]))
    inter = ix * iy
    return inter / (a[2] * a[3] + b[2] * b[3] - inter)


def conformal_bruteforce(scores, alpha):
    # smallest attained q with #{s <= q} / (n + 1) >= 1 - alpha
    n = len(scores)
    for q in sorted(set(scores)):
        if F(sum(1 for s in scores if s <= q), n + 1) >= 1 - alpha:
            return q
    return "inf"


def auc_pairs(pos, neg):
    total = F(0)
    for p, n in product(pos, neg):
        total += 1 if p > n else (F(1, 2) if p == n else 0)
    return total / (len(pos) * len(neg))


def ap_all_point(ranked_tp, n_gt):
    tp = fp = 0
    prec, rec = [], []
    for hit in ranked_tp:
        tp += hit
        fp += not hit
        prec.append(F(tp, tp + fp))
        rec.append(F(tp, n_gt))
    for i in range(len(prec) - 2, -1, -1):
        prec[i] = max(prec[i], prec[i + 1])
    area, prev = F(0), F(0)
    for p, r in zip(prec, rec):
        area += (r - prev) * p
        prev = r
    return area


print("softmax[1,2,3]       =", [mp.nstr(v, 20) for v in softmax([1, 2, 3])])
print("1 - softmax[1,2,3][2] =", mp.nstr(1 - softmax([1, 2, 3])[2], 20))
print("softmax[1000,0]      =", [mp.nstr(v, 20) for v in softmax([1000, 0])])
print("iou (0,0,2,2)/(1,0,2,2) =", iou((0, 0, 2, 2), (1, 0, 2, 2)))
print("detection error one match at 1/3, one miss =", 1 - (F(1, 3) + 0) / 2)
cf = softmax([mp.log(3), 0])
print("softmax[ln3,0]       =", [mp.nstr(v, 20) for v in cf])
print("distance [.5,.5]-[.75,.25] =", mp.nstr(mp.sqrt((F(1, 2) - F(3, 4)) ** 2 * 2), 20))
print("quantile [.1,.2,.3,.4] a=.2 =", conformal_bruteforce([F(1, 10), F(2, 10), F(3, 10), F(4, 10)], F(1, 5)))
print("quantile [.1,.2,.3,.4] a=.5 =", conformal_bruteforce([F(1, 10), F(2, 10), F(3, 10), F(4, 10)], F(1, 2)))
print("quantile n=1 a=.1 =", conformal_bruteforce([F(1, 2)], F(1, 10)))
print("rank n=99 a=.1 =", math.ceil(F(100) * (1 - F(1, 10))))
print("auc pos{.9,.4} neg{.5,.1} =", auc_pairs([F(9, 10), F(4, 10)], [F(5, 10), F(1, 10)]))
print("ap [TP,FP,TP] 2 gt =", ap_all_point([True, False, True], 2))
print("correction min(0.5*(0.9-0.5), 0.15) =", min(F(1, 2) * (F(9, 10) - F(1, 2)), F(15, 100)))
print("adaptive q=1 s=.5 g=.9 =", F(9, 10) * 1 + F(1, 10) * min(F(1), F(1, 2)))
print("binomial 3*sqrt(n/4), n=10000 =", 3 * math.sqrt(10000 / 4))
print("KS c(0.05) = sqrt(-ln(0.025)/2) =", mp.nstr(mp.sqrt(-mp.log(mp.mpf("0.025")) / 2), 20))
print("auc pos{.9,.5} neg{.5,.1} (one tie) =", auc_pairs([F(9, 10), F(5, 10)], [F(5, 10), F(1, 10)]))

# Equalized-odds fixture, records as (group, reference, predicted):
# group 0 has 5 positives all predicted positive and 2 negatives predicted
# negative; group 1 misses one of its 5 positives.
fixture = [(0, 1, 1)] * 5 + [(0, 0, 0)] * 2 + [(1, 1, 1)] * 4 + [(1, 1, 0)] + [(1, 0, 0)] * 2


def rate(group, ref):
    rows = [r for r in fixture if r[0] == group and r[1] == ref]
    return F(sum(r[2] for r in rows), len(rows))


print("eod fixture =", max(abs(rate(0, 1) - rate(1, 1)), abs(rate(0, 0) - rate(1, 0))))
print("dpd fixture =", abs(F(sum(r[2] for r in fixture if r[0] == 0), 7) - F(sum(r[2] for r in fixture if r[0] == 1), 7)))

# Ten-record fixture: group 0 = TP, FN, FP, TN, TN; group 1 = TP, TP, TP, TN, TN.
small = [(0, 1, 1), (0, 1, 0), (0, 0, 1), (0, 0, 0), (0, 0, 0),
         (1, 1, 1), (1, 1, 1), (1, 1, 1), (1, 0, 0), (1, 0, 0)]


def small_rate(group, ref):
    rows = [r for r in small if r[0] == group and r[1] == ref]
    return F(sum(r[2] for r in rows), len(rows))


def small_pos(group):
    rows = [r for r in small if r[0] == group]
    return F(sum(r[2] for r in rows), len(rows))


print("eod small fixture =", max(abs(small_rate(0, 1) - small_rate(1, 1)),
                                 abs(small_rate(0, 0) - small_rate(1, 0))))
print("dpd small fixture =", abs(small_pos(0) - small_pos(1)))
