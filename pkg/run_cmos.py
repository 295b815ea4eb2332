#!/usr/bin/env python3
"""CLI entrypoint for the CMoS forecasting toolkit."""

from __future__ import annotations

from cmos_forecast.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
