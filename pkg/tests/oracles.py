"""Reference values computed independently of the package and frozen.

Quadratures were evaluated with mpmath at 30 digits; certificate values
are regression constants from a validated run.
"""

import math

# sin 2x, eps = +1, C^2 = 1/2, left side of pi/4: tangency at pi/12
CP_T0 = 0.762443419040947775376708878416  # int_0^{pi/12} dx / sqrt(1/2 - sin 2x)
CP_T1 = 2.28733025712284385760891785527  # t0 + int_{-pi/2}^0 of the same integrand
CP_OMEGA = 0.5 * (CP_T0 + CP_T1)
CP_Z0 = 1.9004968798767783
CP_Z1 = 1.5517492044789878

# stability inequalities for sin 2x, eps = +1, x0 = -7 pi/12
CP_I1 = 1.86245971890542435452467675576  # int_{-7pi/12}^{pi/12} dx / sqrt(1 - sin 2x)
CP_INEQ1_MARGIN = -12.8016963930881726360359494979  # 2 I1^2 - 2 pi^2
CP_I2 = 1.52488683808189608223220897685  # int_{-pi/2}^0 dx / sqrt(1/2 - sin 2x)
CP_INEQ2_MARGIN = -10.4380893263571061986048650989  # 4 I2^2 - 2 pi^2

# G(x) = -1/2 ln tan x on (0, pi/2) anchored at pi/4
G_PI_6 = math.log(3.0) / 4.0

# complete elliptic integrals K(k), modulus convention (m = k^2)
K_HALF = 1.6857503548125960428712036578  # K(1/2)
K_QUARTER = 1.5962422221317835101489690715  # K(1/4)
