"""
The ipdtsim settings are read from environment variables prefixed with
``IPDTSIM_``. For example, to write run directories somewhere else:
    export IPDTSIM_OUTPUT_ROOT=/tmp/ipdt-runs
This module provides the `ipdtsim_settings` object, that is used to access
the settings. It checks for user settings first, with fallback to defaults.
"""

import os

from ipdtsim.base import ConfigurationError


ENV_PREFIX = "IPDTSIM_"

DEFAULTS = {
    "OUTPUT_ROOT": "runs",
    # default step: min(d / DELAY_SAMPLES, Ti / INTEGRAL_SAMPLES, MAX_STEP)
    "MAX_STEP": 0.05,
    "DELAY_SAMPLES": 20,
    "INTEGRAL_SAMPLES": 50,
    "DERIV_FILTER_N": 10.0,
    "PHASE_MARGIN_WARNING": 30.0,
    "SETTLING_BAND": 0.02,
    "RISE_LOW": 0.1,
    "RISE_HIGH": 0.9,
    "FINAL_WINDOW": 0.1,
    "FIT_WINDOW": 0.4,
    "RAMP_TOLERANCE": 0.05,
    "DIVERGENCE_FACTOR": 1000.0,
    "LOG_LEVEL": "WARNING",
}

# List of settings that have been removed
REMOVED_SETTINGS = []


class IpdtsimSettings:
    """
    A settings object that allows the ipdtsim settings to be accessed as
    properties. For example:
        from ipdtsim.settings import ipdtsim_settings
        print(ipdtsim_settings.MAX_STEP)
    Values given through the environment are coerced to the type of the
    corresponding default.
    """

    def __init__(self, user_settings=None, defaults=None):
        if user_settings is not None:
            self._user_settings = self.__check_user_settings(dict(user_settings))
        self.defaults = defaults or DEFAULTS
        self._cached_attrs = set()

    @property
    def user_settings(self):
        if not hasattr(self, "_user_settings"):
            self._user_settings = self.__check_user_settings(self.__read_environ())
        return self._user_settings

    def __getattr__(self, attr):
        if attr.startswith("_") or attr not in self.defaults:
            raise AttributeError(f"Invalid ipdtsim setting: '{attr}'")

        try:
            # Check if present in user settings
            val = self.__coerce(attr, self.user_settings[attr])
        except KeyError:
            # Fall back to defaults
            val = self.defaults[attr]

        # Cache the result
        self._cached_attrs.add(attr)
        setattr(self, attr, val)
        return val

    def __read_environ(self):
        return {
            key[len(ENV_PREFIX) :]: value
            for key, value in os.environ.items()
            if key.startswith(ENV_PREFIX)
        }

    def __coerce(self, attr, value):
        default = self.defaults[attr]
        if isinstance(value, str) and not isinstance(default, str):
            try:
                return type(default)(value)
            except ValueError as err:
                raise ConfigurationError(
                    f"The '{ENV_PREFIX}{attr}' setting must be a {type(default).__name__}, got {value!r}."
                ) from err
        return value

    def __check_user_settings(self, user_settings):
        for setting in REMOVED_SETTINGS:
            if setting in user_settings:
                raise ConfigurationError(
                    f"The '{setting}' setting has been removed. "
                    f"Please refer to the ipdtsim documentation for available settings."
                )
        return user_settings

    def reload(self):
        for attr in self._cached_attrs:
            delattr(self, attr)
        self._cached_attrs.clear()
        if hasattr(self, "_user_settings"):
            delattr(self, "_user_settings")


ipdtsim_settings = IpdtsimSettings(None, DEFAULTS)
