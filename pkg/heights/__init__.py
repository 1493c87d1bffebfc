"""
Heights of morphisms P^m -> P^M over Q.

    rational_core   valuations, fractional ideals, #P^m(Z/q)
    morphism        homogeneous lifts: evaluation, normalization, composition
    resultant       Macaulay resultants, pseudoinverses, norm bounds
    padic_local     excess valuations and local density tables
    archimedean     fundamental-domain volumes, kappa, Green's functions
    constants       c_Q(f), canonical heights, c_Q(f^i o g) and its limit
    counting        point counts by height against the predicted main terms
    pipeline        every step above for one morphism
"""

__all__ = [
    'rational_core',
    'morphism',
    'resultant',
    'padic_local',
    'archimedean',
    'constants',
    'counting',
    'pipeline',
]
