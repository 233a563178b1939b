"""
Reference-ellipsoid geometry, normal gravity and frame utilities.

All angles are in radians and all vectors are resolved in the local
North-East-Down (NED) frame unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import GimbalLock, RangeExceeded

FREE_AIR = 0
INVERSE_SQUARE = 1


@dataclass(frozen=True)
class EllipsoidModel:
    """
    Planet reference ellipsoid with normal-gravity parameters.

    Parameters
    ----------
    semi_major_axis : float
        Equatorial radius in meters.
    eccentricity_sq : float
        First eccentricity squared.
    rotation_rate : float
        Planet rotation rate in rad/s.
    gravity_equator : float
        Normal gravity on the equator at zero height, m/s^2.
    gravity_k : float
        Somigliana constant. Zero gives latitude-independent gravity.
    height_model : int
        ``FREE_AIR`` (linear free-air gradient) or ``INVERSE_SQUARE``.
    """

    semi_major_axis: float
    eccentricity_sq: float
    rotation_rate: float
    gravity_equator: float
    gravity_k: float = 0.0
    height_model: int = FREE_AIR

    def __post_init__(self):
        if not self.semi_major_axis > 0:
            raise ValueError("semi_major_axis must be positive")
        if not 0.0 <= self.eccentricity_sq < 1.0:
            raise ValueError("eccentricity_sq must be in [0, 1)")
        if self.rotation_rate < 0:
            raise ValueError("rotation_rate must be non-negative")
        if self.height_model not in (FREE_AIR, INVERSE_SQUARE):
            raise ValueError("unknown height_model")

    def as_array(self) -> NDArray[np.float64]:
        """Flat parameter vector consumed by the numerical kernels."""
        return np.array(
            [
                self.semi_major_axis,
                self.eccentricity_sq,
                self.rotation_rate,
                self.gravity_equator,
                self.gravity_k,
                float(self.height_model),
            ]
        )

    def with_rotation(self, rotation_rate: float) -> EllipsoidModel:
        return EllipsoidModel(
            self.semi_major_axis,
            self.eccentricity_sq,
            rotation_rate,
            self.gravity_equator,
            self.gravity_k,
            self.height_model,
        )


WGS84 = EllipsoidModel(
    semi_major_axis=6378137.0,
    eccentricity_sq=0.00669437999014,
    rotation_rate=7.292115e-5,
    gravity_equator=9.7803253359,
    gravity_k=0.00193185265241,
)

MARS = EllipsoidModel(
    semi_major_axis=3396190.0,
    eccentricity_sq=0.011738,
    rotation_rate=7.088218e-5,
    gravity_equator=3.71,
    gravity_k=0.0,
    height_model=INVERSE_SQUARE,
)

NON_ROTATING_EARTH = WGS84.with_rotation(0.0)


def spherical(radius: float, g0: float, rotation_rate: float = 0.0) -> EllipsoidModel:
    """Spherical planet with constant surface gravity and inverse-square falloff."""
    return EllipsoidModel(radius, 0.0, rotation_rate, g0, 0.0, INVERSE_SQUARE)


PLANETS = {
    "wgs84": WGS84,
    "earth": WGS84,
    "mars": MARS,
    "earth-nonrotating": NON_ROTATING_EARTH,
}


@dataclass(frozen=True)
class GeodeticPosition:
    latitude: float
    longitude: float
    height: float

    def __post_init__(self):
        if abs(self.latitude) > math.pi / 2:
            raise ValueError("latitude outside [-pi/2, pi/2]")
        object.__setattr__(self, "longitude", wrap_longitude(self.longitude))

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.latitude, self.longitude, self.height])

    @classmethod
    def from_array(cls, p: ArrayLike) -> GeodeticPosition:
        lat, lon, h = (float(x) for x in p)
        return cls(lat, lon, h)


def wrap_longitude(lon: float) -> float:
    """Normalize longitude to (-pi, pi]."""
    lon = math.fmod(lon + math.pi, 2.0 * math.pi)
    if lon <= 0.0:
        lon += 2.0 * math.pi
    return lon - math.pi


def skew(v: ArrayLike) -> NDArray[np.float64]:
    """Cross-product matrix, ``skew(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def radii_of_curvature(lat: float, model: EllipsoidModel = WGS84) -> tuple[float, float]:
    """
    Meridian and transverse radii of curvature.

    Returns
    -------
    r_n : float
        Meridian radius (north-south), m.
    r_e : float
        Transverse radius (east-west, prime vertical), m.
    """
    a, e2 = model.semi_major_axis, model.eccentricity_sq
    denom = 1.0 - e2 * math.sin(lat) ** 2
    r_n = a * (1.0 - e2) / denom**1.5
    r_e = a / math.sqrt(denom)
    return r_n, r_e


def radii_derivatives(lat: float, model: EllipsoidModel = WGS84) -> tuple[float, float]:
    """Latitude derivatives of the meridian and transverse radii."""
    a, e2 = model.semi_major_axis, model.eccentricity_sq
    s, c = math.sin(lat), math.cos(lat)
    denom = 1.0 - e2 * s * s
    dr_n = 3.0 * a * (1.0 - e2) * e2 * s * c / denom**2.5
    dr_e = a * e2 * s * c / denom**1.5
    return dr_n, dr_e


def surface_gravity(lat: float, model: EllipsoidModel = WGS84) -> float:
    """Somigliana normal gravity on the ellipsoid surface."""
    s2 = math.sin(lat) ** 2
    return (
        model.gravity_equator
        * (1.0 + model.gravity_k * s2)
        / math.sqrt(1.0 - model.eccentricity_sq * s2)
    )


def _height_factor(h: float, model: EllipsoidModel) -> float:
    a = model.semi_major_axis
    if model.height_model == FREE_AIR:
        return 1.0 - 2.0 * h / a
    return (a / (a + h)) ** 2


def gravity_ned(pos: GeodeticPosition | ArrayLike, model: EllipsoidModel = WGS84) -> NDArray[np.float64]:
    """
    Gravity vector in NED. North and east deflections are taken as zero.
    """
    lat, _, h = _llh(pos)
    return np.array([0.0, 0.0, surface_gravity(lat, model) * _height_factor(h, model)])


def earth_rate_ned(lat: float, model: EllipsoidModel = WGS84) -> NDArray[np.float64]:
    w = model.rotation_rate
    return np.array([w * math.cos(lat), 0.0, -w * math.sin(lat)])


def transport_rate(
    pos: GeodeticPosition | ArrayLike, v_ned: ArrayLike, model: EllipsoidModel = WGS84
) -> NDArray[np.float64]:
    """Angular rate of the NED frame w.r.t. the planet-fixed frame."""
    lat, _, h = _llh(pos)
    vn, ve, _ = v_ned
    r_n, r_e = radii_of_curvature(lat, model)
    return np.array(
        [ve / (r_e + h), -vn / (r_n + h), -ve * math.tan(lat) / (r_e + h)]
    )


def euler_to_dcm(roll: float, pitch: float, yaw: float) -> NDArray[np.float64]:
    """Body-to-NED DCM from ZYX (yaw, pitch, roll) Euler angles."""
    sr, cr = math.sin(roll), math.cos(roll)
    sp, cp = math.sin(pitch), math.cos(pitch)
    sy, cy = math.sin(yaw), math.cos(yaw)
    return np.array(
        [
            [cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy],
            [cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy],
            [-sp, sr * cp, cr * cp],
        ]
    )


def dcm_to_euler(dcm: ArrayLike) -> tuple[float, float, float]:
    """Inverse of :func:`euler_to_dcm`. Raises ``GimbalLock`` near pitch = +-90 deg."""
    c = np.asarray(dcm)
    if abs(c[2, 0]) >= 1.0 - 1e-9:
        raise GimbalLock(f"pitch at gimbal lock (C31={c[2, 0]:.12f})")
    roll = math.atan2(c[2, 1], c[2, 2])
    pitch = -math.asin(c[2, 0])
    yaw = math.atan2(c[1, 0], c[0, 0])
    return roll, pitch, yaw


ORTHO_TOL = 1e-12


def orthonormalize(dcm: NDArray[np.float64], max_passes: int = 4) -> NDArray[np.float64]:
    """
    Symmetric correction ``C (3I - C^T C) / 2``, repeated until
    ``||C^T C - I||_F`` drops below ``ORTHO_TOL``.

    Each pass roughly squares the defect, so a normal step needs one or two.
    """
    c = np.asarray(dcm, dtype=float)
    for _ in range(max_passes):
        e = c.T @ c - np.eye(3)
        c = c - 0.5 * c @ e
        if np.linalg.norm(c.T @ c - np.eye(3)) < ORTHO_TOL:
            break
    return c


def ned_delta(
    ref: GeodeticPosition | ArrayLike,
    other: GeodeticPosition | ArrayLike,
    model: EllipsoidModel = WGS84,
) -> NDArray[np.float64]:
    """
    Small-angle North/East/Up offset of ``other`` relative to ``ref`` in meters.
    """
    lat1, lon1, h1 = _llh(ref)
    lat2, lon2, h2 = _llh(other)
    dlon = wrap_longitude(lon2 - lon1)
    if abs(lat2 - lat1) > math.radians(1.0) or abs(dlon) > math.radians(1.0):
        raise RangeExceeded("positions more than 1 deg apart")
    r_n, r_e = radii_of_curvature(lat1, model)
    return np.array(
        [(lat2 - lat1) * (r_n + h1), dlon * (r_e + h1) * math.cos(lat1), h2 - h1]
    )


def _llh(pos) -> tuple[float, float, float]:
    if isinstance(pos, GeodeticPosition):
        return pos.latitude, pos.longitude, pos.height
    lat, lon, h = pos
    return float(lat), float(lon), float(h)
