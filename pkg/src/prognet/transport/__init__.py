from .throttle import ThrottleConfig, paced_send
from .server import BundleServer, RequestLog, RequestRecord, serve_bundle
from .session import (ProgressiveSession, SessionState, SingletonResult,
                      StageResult, StageTiming, singleton_session)
from .control import ControlServer, start_control_server

__all__ = [
    "ThrottleConfig", "paced_send",
    "BundleServer", "RequestLog", "RequestRecord", "serve_bundle",
    "ProgressiveSession", "SessionState", "SingletonResult", "StageResult",
    "StageTiming", "singleton_session",
    "ControlServer", "start_control_server",
]
