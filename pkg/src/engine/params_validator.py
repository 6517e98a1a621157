"""Circuit configuration validation rules."""

import math
from typing import Any, Dict, List

from .errors import ConfigurationError, ParameterValidationError


class CircuitValidator:
    """Validation of unit-suffixed circuit documents and circuit values."""

    UNIT_SUFFIXES = ("_pH", "_fF", "_uA", "_mphi0")

    REQUIRED_KEYS = (
        "L1_pH", "L2_pH", "C1_fF", "C2_fF", "I1_uA", "I2_uA", "C12_fF", "M12_pH",
    )
    OPTIONAL_KEYS = ("phi1_z_mphi0", "phi2_z_mphi0")

    POSITIVE_KEYS = ("L1_pH", "L2_pH", "C1_fF", "C2_fF", "I1_uA", "I2_uA")

    @classmethod
    def validate_keys(cls, data: Dict[str, Any]) -> bool:
        """Check that the document holds exactly the known, unit-suffixed keys.

        Args:
            data: Parsed key/value document

        Returns:
            bool: True if the key set is valid

        Raises:
            ConfigurationError: If a key lacks a unit suffix, is unknown, or is missing
        """
        for key in data:
            if not key.endswith(cls.UNIT_SUFFIXES):
                raise ConfigurationError(
                    f"Key '{key}' has no recognised unit suffix {cls.UNIT_SUFFIXES}", key)
            if key not in cls.REQUIRED_KEYS and key not in cls.OPTIONAL_KEYS:
                raise ConfigurationError(f"Unknown circuit key '{key}'", key)

        for key in cls.REQUIRED_KEYS:
            if key not in data:
                raise ConfigurationError(f"Missing required circuit key '{key}'", key)

        for key, value in data.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigurationError(
                    f"Key '{key}' must be a number, got {value!r}", key)

        return True

    @classmethod
    def validate_positive(cls, key: str, value: float) -> bool:
        """Validate a strictly positive physical value.

        Raises:
            ParameterValidationError: If the value is not finite and positive
        """
        if not math.isfinite(value) or value <= 0:
            raise ParameterValidationError(f"{key} must be strictly positive, got {value}", value)
        return True

    @classmethod
    def validate_coupling_capacitance(cls, value: float) -> bool:
        if not math.isfinite(value) or value < 0:
            raise ParameterValidationError(f"C12_fF must be non-negative, got {value}", value)
        return True

    @classmethod
    def validate_mutual_inductance(cls, m12: float, l1: float, l2: float) -> bool:
        """Validate the passivity bound |M12| < sqrt(L1*L2).

        Raises:
            ParameterValidationError: If the mutual inductance is too large
        """
        bound = math.sqrt(l1 * l2)
        if not math.isfinite(m12) or abs(m12) >= bound:
            raise ParameterValidationError(
                f"M12_pH must satisfy |M12| < sqrt(L1*L2) = {bound:.6g}, got {m12}", m12)
        return True

    @classmethod
    def validate_bias(cls, key: str, value: float) -> bool:
        if not math.isfinite(value):
            raise ParameterValidationError(f"{key} must be finite, got {value}", value)
        return True

    @classmethod
    def validate_params(cls, data: Dict[str, Any]) -> List[str]:
        """Collect every validation message for a circuit document.

        Args:
            data: Parsed key/value document

        Returns:
            List[str]: Validation error messages (empty if valid)
        """
        errors = []

        try:
            cls.validate_keys(data)
        except ConfigurationError as e:
            errors.append(str(e))
            return errors

        for key in cls.POSITIVE_KEYS:
            try:
                cls.validate_positive(key, float(data[key]))
            except ParameterValidationError as e:
                errors.append(str(e))

        try:
            cls.validate_coupling_capacitance(float(data["C12_fF"]))
        except ParameterValidationError as e:
            errors.append(str(e))

        l1, l2 = float(data["L1_pH"]), float(data["L2_pH"])
        if l1 > 0 and l2 > 0:
            try:
                cls.validate_mutual_inductance(float(data["M12_pH"]), l1, l2)
            except ParameterValidationError as e:
                errors.append(str(e))

        for key in cls.OPTIONAL_KEYS:
            if key in data:
                try:
                    cls.validate_bias(key, float(data[key]))
                except ParameterValidationError as e:
                    errors.append(str(e))

        return errors
