"""Independent reference computations used to check the library."""

from regcov.taxonomy import Kind, capabilities, propensities


def brute_force_metrics(pred, gold, family):
    """Walk every (question, label) pair and tally by hand, then apply the
    textbook formulas in floating point.

    Returns ``((a, b, c, d), (precision, recall, f1), kappa)`` where ``a`` is
    both-yes, ``b`` prediction-only, ``c`` gold-only and ``d`` neither.
    """
    universe = capabilities() if family is Kind.CAPABILITY else propensities()
    a = b = c = d = 0
    for q in gold:
        p_set = pred[q].capabilities if family is Kind.CAPABILITY else pred[q].propensities
        g_set = gold[q].capabilities if family is Kind.CAPABILITY else gold[q].propensities
        for code in universe:
            x, y = code in p_set, code in g_set
            if x and y:
                a += 1
            elif x:
                b += 1
            elif y:
                c += 1
            else:
                d += 1
    n = a + b + c + d
    if a + b == 0 and a + c == 0:
        prec = rec = f1 = 1.0
    else:
        prec = a / (a + b) if a + b else 0.0
        rec = a / (a + c) if a + c else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    po = (a + d) / n
    pe = ((a + b) * (a + c) + (c + d) * (b + d)) / (n * n)
    kappa = 1.0 if pe == 1 else (po - pe) / (1 - pe)
    return (a, b, c, d), (prec, rec, f1), kappa


def keyword_labels(rules, question):
    """Apply a ``{keyword: code or [codes]}`` table the slow way."""
    out = set()
    for keyword, codes in rules.items():
        if isinstance(codes, str):
            codes = [codes]
        if keyword.lower() in question.lower():
            out.update(codes)
    return out
