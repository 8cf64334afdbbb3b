"""nvscan: simulator and analysis toolkit for sub-Kelvin scanning NV
magnetometry over thin superconducting discs.

Core package layout:
  fieldmodel    stray field of Pearl vortices, Meissner edge response, bias
  sensor        NV projection, resonance shift, pulsed-ODMR photon statistics
  fitting       double-Gaussian least-squares estimation of resonance parameters
  scan          raster-scan simulation, map reconstruction, sensitivity, vortices
  thermal       critical-temperature extrapolation and critical-current detection
  demos         desk-scale reproductions of the published figures
  service       FastAPI wrapper with pydantic request/response schemas
  cli           thin client of the service
"""

__version__ = "0.1.0"
