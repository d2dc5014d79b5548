# pylint: disable=missing-module-docstring
# noqa: D104
