"""Pure-Python loop kernel, used when the compiled extension is unavailable."""


def run_loop(power, noise, bits, state, pole, gain, s_wheat, p_comp):
    n = len(power)
    noisy = len(noise) > 0
    if len(bits) < n or (noisy and len(noise) < n):
        raise ValueError("buffer length mismatch")
    power = power.tolist()
    noise = noise.tolist() if noisy else None
    out = [0] * n
    for i in range(n):
        v = s_wheat * state
        if noisy:
            v += noise[i]
        b = 1 if v >= 0.0 else -1
        out[i] = b
        state = pole * state + gain * (power[i] - b * p_comp)
    bits[:n] = out
    return state
