"""Numba inner loops: fixed-step RK4 on the controlled SIR system and the
final-size root finder.

Everything in this module is plain float math on scalars and preallocated
arrays.  The public API (validation, trajectory objects, error handling)
lives in the sibling modules; nothing here checks its inputs.

State layout for the augmented system on a constant-sigma segment:

    x' = -gamma*sigma*x*y
    y' =  gamma*sigma*x*y - gamma*y
    A' =  x/y        (feeds the  int x/y dr  switching integrals)
    B' =  1/y        (feeds the  int (sigma_ref*x - 1)/y dr  integrals,
                      via  sigma_ref*dA - dB)

The accumulators are co-integrated with the state by the same RK4 scheme so
their error tracks the state error; 1/y spans orders of magnitude, which a
post-hoc quadrature on samples would not handle at matching accuracy.
"""

import math

import numpy as np
from numba import njit

# Segments shorter than this are treated as absent.  Must match the guard
# used when assembling trajectories so that endpoint-only evaluation and
# dense trajectories run the exact same step sequence.
SEG_EPS = 1e-12


@njit(cache=True)
def n_steps(seg_len, h_cap):
    """Step count for one constant-sigma segment.

    h_cap is the requested step ceiling (0.1/gamma unless the caller hints
    otherwise); the segment is further forced to at least 100 steps via the
    seg_len/100 cap and to at least 1000 samples for downstream quadrature.
    """
    if seg_len <= SEG_EPS:
        return 0
    h = h_cap
    if seg_len / 100.0 < h:
        h = seg_len / 100.0
    n = int(math.ceil(seg_len / h))
    if n < 1000:
        n = 1000
    return n


@njit(cache=True)
def rk4_fill(x0, y0, a0, b0, gamma, sigma, dt, n, xs, ys, As, Bs):
    """Integrate one segment of duration dt with n RK4 steps, filling the
    n+1 output slots (segment start included).  Accumulators continue from
    a0/b0."""
    h = dt / n
    x = x0
    y = y0
    a = a0
    b = b0
    xs[0] = x
    ys[0] = y
    As[0] = a
    Bs[0] = b
    for i in range(n):
        f1 = gamma * sigma * x * y
        k1x = -f1
        k1y = f1 - gamma * y
        k1a = x / y
        k1b = 1.0 / y

        x2 = x + 0.5 * h * k1x
        y2 = y + 0.5 * h * k1y
        f2 = gamma * sigma * x2 * y2
        k2x = -f2
        k2y = f2 - gamma * y2
        k2a = x2 / y2
        k2b = 1.0 / y2

        x3 = x + 0.5 * h * k2x
        y3 = y + 0.5 * h * k2y
        f3 = gamma * sigma * x3 * y3
        k3x = -f3
        k3y = f3 - gamma * y3
        k3a = x3 / y3
        k3b = 1.0 / y3

        x4 = x + h * k3x
        y4 = y + h * k3y
        f4 = gamma * sigma * x4 * y4
        k4x = -f4
        k4y = f4 - gamma * y4
        k4a = x4 / y4
        k4b = 1.0 / y4

        x = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        y = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
        a = a + h * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
        b = b + h * (k1b + 2.0 * k2b + 2.0 * k3b + k4b) / 6.0
        xs[i + 1] = x
        ys[i + 1] = y
        As[i + 1] = a
        Bs[i + 1] = b


@njit(cache=True)
def rk4_last(x0, y0, gamma, sigma, dt, n):
    """Same step sequence as rk4_fill but endpoint-only.

    Returns (x, y, dA, dB) with the accumulators started at zero, so dA is
    int x/y and dB is int 1/y over the segment.  Keeping the arithmetic
    identical to rk4_fill makes endpoint evaluations bit-identical to dense
    trajectories for the same (x0, y0, dt, n).
    """
    h = dt / n
    x = x0
    y = y0
    a = 0.0
    b = 0.0
    for i in range(n):
        f1 = gamma * sigma * x * y
        k1x = -f1
        k1y = f1 - gamma * y
        k1a = x / y
        k1b = 1.0 / y

        x2 = x + 0.5 * h * k1x
        y2 = y + 0.5 * h * k1y
        f2 = gamma * sigma * x2 * y2
        k2x = -f2
        k2y = f2 - gamma * y2
        k2a = x2 / y2
        k2b = 1.0 / y2

        x3 = x + 0.5 * h * k2x
        y3 = y + 0.5 * h * k2y
        f3 = gamma * sigma * x3 * y3
        k3x = -f3
        k3y = f3 - gamma * y3
        k3a = x3 / y3
        k3b = 1.0 / y3

        x4 = x + h * k3x
        y4 = y + h * k3y
        f4 = gamma * sigma * x4 * y4
        k4x = -f4
        k4y = f4 - gamma * y4
        k4a = x4 / y4
        k4b = 1.0 / y4

        x = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        y = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
        a = a + h * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
        b = b + h * (k1b + 2.0 * k2b + 2.0 * k3b + k4b) / 6.0
    return x, y, a, b


@njit(cache=True)
def xinf_root(xT, yT, sigma0):
    """Unique root u in (0, 1/sigma0) of u*exp(-sigma0*u) = xT*exp(-sigma0*(xT+yT)).

    Solved in log form, g(u) = ln(u) - sigma0*u - c, which is strictly
    increasing on (0, 1/sigma0): bracketed bisection on
    (1e-15, 1/sigma0 - 1e-15) followed by a short Newton polish.  Returns
    NaN when the bracket fails (cannot happen for valid epidemic states).
    """
    c = math.log(xT) - sigma0 * (xT + yT)
    lo = 1e-15
    hi = 1.0 / sigma0 - 1e-15
    glo = math.log(lo) - sigma0 * lo - c
    ghi = math.log(hi) - sigma0 * hi - c
    if glo > 0.0 or ghi < 0.0:
        return np.nan
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        gm = math.log(mid) - sigma0 * mid - c
        if gm < 0.0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    for _ in range(3):
        g = math.log(u) - sigma0 * u - c
        dg = 1.0 / u - sigma0
        if dg <= 0.0:
            break
        step = g / dg
        un = u - step
        if un <= 0.0 or un >= 1.0 / sigma0:
            break
        u = un
    return u


@njit(cache=True)
def endpoint_state(t1, eta, T, gamma, sigma1, sigma2, x0, y0, h_cap):
    """Run the three-phase control (sigma2, sigma1, sigma2) to the horizon T.

    Returns (y_mid, x_T, y_T, dA_tail, dB_tail) where y_mid is the infected
    fraction when the strict phase ends and dA_tail/dB_tail accumulate int x/y
    and int 1/y over the final mild phase [t1+eta, T] only.
    """
    x = x0
    y = y0
    if t1 > SEG_EPS:
        m = n_steps(t1, h_cap)
        x, y, _, _ = rk4_last(x, y, gamma, sigma2, t1, m)
    if eta > SEG_EPS:
        m = n_steps(eta, h_cap)
        x, y, _, _ = rk4_last(x, y, gamma, sigma1, eta, m)
    y_mid = y
    t3 = T - (t1 + eta)
    da = 0.0
    db = 0.0
    if t3 > SEG_EPS:
        m = n_steps(t3, h_cap)
        x, y, da, db = rk4_last(x, y, gamma, sigma2, t3, m)
    return y_mid, x, y, da, db


@njit(cache=True)
def objective_value(t1, eta, T, gamma, sigma0, sigma1, sigma2, kappa, x0, y0, h_cap):
    """J(t1, eta) = x_inf(x(T), y(T)) + kappa*(sigma1*eta + sigma2*(T-eta))."""
    _, xT, yT, _, _ = endpoint_state(t1, eta, T, gamma, sigma1, sigma2, x0, y0, h_cap)
    xinf = xinf_root(xT, yT, sigma0)
    return xinf + kappa * (sigma1 * eta + sigma2 * (T - eta))


@njit(cache=True)
def objective_row(t1s, eta, T, gamma, sigma0, sigma1, sigma2, kappa, x0, y0, h_cap, out):
    for i in range(t1s.shape[0]):
        out[i] = objective_value(
            t1s[i], eta, T, gamma, sigma0, sigma1, sigma2, kappa, x0, y0, h_cap
        )


@njit(cache=True)
def eta_bound_row(t1s, eta, T, gamma, sigma0, sigma1, sigma2, x0, y0, h_cap, out):
    """Per-(t1, eta) threshold that the cost weight kappa is compared against.

    dJ/deta > 0 iff this bound exceeds kappa.  Written in the form
    gamma*xinf*y(t2)*(1 - (sigma0-sigma2)*gamma*y(T)*int_{t2}^{T} x/y) / (1 - sigma0*xinf),
    which stays well-conditioned when sigma2 = sigma0 (second factor is then
    exactly 1).
    """
    for i in range(t1s.shape[0]):
        y2, xT, yT, da, _ = endpoint_state(
            t1s[i], eta, T, gamma, sigma1, sigma2, x0, y0, h_cap
        )
        xinf = xinf_root(xT, yT, sigma0)
        out[i] = (
            gamma
            * xinf
            * y2
            * (1.0 - (sigma0 - sigma2) * gamma * yT * da)
            / (1.0 - sigma0 * xinf)
        )


@njit(cache=True)
def adjoint_rk4_fill(xT, yT, l1T, l2T, gamma, sigma, dt, n, xs, ys, l1s, l2s):
    """Backward RK4 over one constant-sigma segment of duration dt (> 0).

    The costate system
        l1' = (l1 - l2)*gamma*sigma*y
        l2' = (l1 - l2)*gamma*sigma*x + gamma*l2
    is integrated together with (x, y) from the segment end so that no
    interpolation of the forward states is needed; arrays are filled in
    forward time order (slot n = segment end, slot 0 = segment start).
    """
    h = -dt / n
    x = xT
    y = yT
    l1 = l1T
    l2 = l2T
    xs[n] = x
    ys[n] = y
    l1s[n] = l1
    l2s[n] = l2
    for i in range(n):
        f1 = gamma * sigma * x * y
        k1x = -f1
        k1y = f1 - gamma * y
        d1 = (l1 - l2) * gamma * sigma
        k1l1 = d1 * y
        k1l2 = d1 * x + gamma * l2

        xa = x + 0.5 * h * k1x
        ya = y + 0.5 * h * k1y
        l1a = l1 + 0.5 * h * k1l1
        l2a = l2 + 0.5 * h * k1l2
        f2 = gamma * sigma * xa * ya
        k2x = -f2
        k2y = f2 - gamma * ya
        d2 = (l1a - l2a) * gamma * sigma
        k2l1 = d2 * ya
        k2l2 = d2 * xa + gamma * l2a

        xb = x + 0.5 * h * k2x
        yb = y + 0.5 * h * k2y
        l1b = l1 + 0.5 * h * k2l1
        l2b = l2 + 0.5 * h * k2l2
        f3 = gamma * sigma * xb * yb
        k3x = -f3
        k3y = f3 - gamma * yb
        d3 = (l1b - l2b) * gamma * sigma
        k3l1 = d3 * yb
        k3l2 = d3 * xb + gamma * l2b

        xc = x + h * k3x
        yc = y + h * k3y
        l1c = l1 + h * k3l1
        l2c = l2 + h * k3l2
        f4 = gamma * sigma * xc * yc
        k4x = -f4
        k4y = f4 - gamma * yc
        d4 = (l1c - l2c) * gamma * sigma
        k4l1 = d4 * yc
        k4l2 = d4 * xc + gamma * l2c

        x = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        y = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
        l1 = l1 + h * (k1l1 + 2.0 * k2l1 + 2.0 * k3l1 + k4l1) / 6.0
        l2 = l2 + h * (k1l2 + 2.0 * k2l2 + 2.0 * k3l2 + k4l2) / 6.0
        xs[n - 1 - i] = x
        ys[n - 1 - i] = y
        l1s[n - 1 - i] = l1
        l2s[n - 1 - i] = l2
