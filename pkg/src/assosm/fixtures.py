"""Published benchmark data matrices and design values.

These are literal fixtures from the original benchmark reports; regenerated
experiments use their own integrator and disturbance realizations, so these
serve design-stage checks only.
"""

import numpy as np

B1_O1 = np.array([[1.0, 1.0588, 1.0397]])
B1_O2 = np.array([[1.0, 0.1857, -0.5515]])
B1_O1PLUS = np.array([[0.9366, -0.5117, -1.3232]])
B1_GAMMA_GRAM = 0.75
B1_K = np.array([[-0.7343]])
B1_Q = np.array([[0.6708]])
B1_P = np.array([[1.4907]])
B1_KAPPA1 = 0.5134
B1_KAPPA2 = 0.4990
B1_SIGMA_COEFF = np.array([1.0946])

B2_O1 = np.array([[2.0, 3.3133, 4.0258]])
B2_O2 = np.array([[3.0, 2.1330, 0.6289]])
B2_O1PLUS = np.array([[3.3242, 0.7827, -1.1786]])
B2_GAMMA_GRAM = 3.0
B2_K = np.array([[-0.3924]])
B2_Q = np.array([[0.2915]])
B2_P = np.array([[3.4305]])
B2_KAPPA1 = 0.2278
B2_KAPPA2 = 0.0655
B2_SIGMA_COEFF = np.array([1.3461])
B2_COLLECT_FEEDBACK = np.array([[-2.0, -1.0]])

B3_K = np.array([[-0.2832, 0.2328, -0.1733]])
B3_P = np.array(
    [
        [20.2193, 8.1914, -21.1564],
        [8.1914, 8.9159, -2.7685],
        [-21.1564, -2.7685, 31.4177],
    ]
)
B3_KAPPA1 = 0.0018
B3_KAPPA2 = 0.0142
B3_SIGMA_COEFF = np.array([0.1539, -0.2355, 0.0961])
