"""Constants shared by the numba and numpy kernel backends."""

import numpy as np

# Lanczos approximation, g = 671/128, 14 terms (relative error ~1e-15 for x > 0).
LANCZOS_G = 5.24218750000000000
LANCZOS_C0 = 0.999999999999997092
LANCZOS_COEF = np.array([
    57.1562356658629235, -59.5979603554754912, 14.1360979747417471,
    -0.491913816097620199, 0.339946499848118887e-4, 0.465236289270485756e-4,
    -0.983744753048795646e-4, 0.158088703224912494e-3, -0.210264441724104883e-3,
    0.217439618115212643e-3, -0.164318106536763890e-3, 0.844182239838527433e-4,
    -0.261908384015814087e-4, 0.368991826595316234e-5,
])
SQRT_2PI = 2.5066282746310005

CF_MAX_ITER = 10000
CF_EPS = 1e-16
CF_TINY = 1e-300
