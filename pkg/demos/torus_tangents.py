"""Scale selection and tangent planes on a torus
==============================================

Ten thousand points on the torus with tube radius 1 and centre radius 4.
The selected scale is compared with the sampling error, the Cech-type
complex is built at that scale, and tangent planes are estimated by local
PCA at a few multiples of t_sel.  The prescribed multiple 11 is far larger
than the tube radius at this sample size, which the angles make visible.
"""

import numpy as np

from tconvex.estimate import reconstruct, tangent_estimates
from tconvex.geom import subspace_angle
from tconvex.manifolds import Torus, epsilon_rate
from tconvex.select import select_scale


def main(n=10_000, seed=0):
    torus = Torus()
    cloud = torus.sample(n, seed=seed).points
    result = select_scale(cloud)
    eps = epsilon_rate(torus, cloud)
    print(f"n = {n}: t_sel = {result.t_sel:.3f}, lambda_choice = {result.lambda_choice:.3f}, "
          f"final K = {result.K}, eps = {eps:.3f}")

    complex_ = reconstruct(cloud, result.t_sel, 2)
    v, e, f = complex_.counts()
    print(f"complex: {v} vertices, {e} edges, {f} triangles")

    probes = range(300)
    for mult in (1, 2, 4, 11):
        scale = mult * result.t_sel
        spaces = tangent_estimates(cloud, scale, 2, points=probes)
        angles = [subspace_angle(s, torus.tangent_at(cloud[i])) for i, s in zip(probes, spaces)]
        print(f"scale {mult:2d} t_sel = {scale:6.3f}: median angle {np.median(angles):.3f}")


if __name__ == "__main__":
    main()
