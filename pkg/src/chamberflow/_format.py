"""Small text helpers: number formatting and readable linear forms."""

import math

SQRT3 = math.sqrt(3.0)


def fmt17(x):
    """Format a float with 17 significant digits (round-trip exact)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot be serialized")
    if x == 0.0:
        return "0.0"
    return format(x, ".17g")


def _coef_text(a):
    """Render a coefficient, recognising small integer multiples of sqrt(3)."""
    for base, suffix in ((1.0, ""), (SQRT3, "sqrt3")):
        k = a / base
        if abs(k - round(k)) < 1e-9 and round(k) != 0:
            k = int(round(k))
            if suffix:
                return suffix if k == 1 else f"{k}*{suffix}"
            return str(k)
    return repr(a)


def linear_form(vec, names=("x1", "x2")):
    """Human-readable text for the linear form with coefficients ``vec``.

    >>> linear_form([1.0, -1.7320508075688772])
    'x1-sqrt3*x2'
    """
    parts = []
    for a, name in zip(vec, names):
        if abs(a) < 1e-12:
            continue
        sign = "-" if a < 0 else "+"
        c = _coef_text(abs(a))
        body = name if c == "1" else f"{c}*{name}"
        parts.append((sign, body))
    if not parts:
        return "0"
    first_sign, first = parts[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        text += sign + body
    return text
