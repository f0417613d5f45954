"""Independent reference values computed with mpmath at 40 digits.

These re-derive the coupling coefficients from the closed forms without
touching the package, so they catch transcription and cancellation errors.
"""

import mpmath as mp

mp.mp.dps = 40


def coefficients_mp(kappa, theta, phi):
    k = mp.mpf(kappa)
    th = mp.mpf(theta)
    ph = mp.mpf(phi)
    s, c = mp.sin(k), mp.cos(k)
    a = s / k**2 + c / k**3
    b = c / k**2 - s / k**3
    sinc, cosc = s / k, c / k
    st2 = mp.sin(th) ** 2
    ct2 = mp.cos(th) ** 2
    s2t = mp.sin(2 * th)
    e1 = mp.expj(ph)
    e2 = mp.expj(2 * ph)
    r2 = mp.sqrt(2)
    return {
        "V11": (2 - 3 * st2) * a - (2 - st2) * cosc,
        "V10": s2t * e1 / r2 * (cosc - 3 * a),
        "V00": 2 * ((1 - 3 * ct2) * a - st2 * cosc),
        "V+-": st2 * e2 * (3 * a - cosc),
        "G11": (2 - st2) * sinc + (2 - 3 * st2) * b,
        "G10": s2t * e1 / r2 * (-sinc - 3 * b),
        "G00": 2 * (st2 * sinc + (1 - 3 * ct2) * b),
        "G+-": st2 * e2 * (sinc + 3 * b),
    }


def magic_angle_mp(kappa):
    """Closed-form root of V00(kappa, theta) = 0: cos^2 theta = (A - C) / (3A - C)."""
    k = mp.mpf(kappa)
    a = mp.sin(k) / k**2 + mp.cos(k) / k**3
    c = mp.cos(k) / k
    return mp.acos(mp.sqrt((a - c) / (3 * a - c)))


def sign_flip_angle_mp(kappa):
    """Root of V00(theta) = -V00(pi/2): cos^2 theta = 2 (A - C) / (3A - C)."""
    k = mp.mpf(kappa)
    a = mp.sin(k) / k**2 + mp.cos(k) / k**3
    c = mp.cos(k) / k
    return mp.acos(mp.sqrt(2 * (a - c) / (3 * a - c)))


def to_complex(x):
    return complex(mp.re(x), mp.im(x))
