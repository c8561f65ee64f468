"""REST API: authentication, batch lifecycle, upload-inspect pipeline, admin.

Success responses are plain JSON with HTTP 200; every error response has the
shape {"error": <code>, "message": <text>}.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from surgscan import __version__
from surgscan.core import InstrumentClass
from surgscan.imaging import (
    UnsupportedImage,
    decode_image,
    png_bytes,
    resize_preserve_aspect,
    unsharp_mask,
)
from surgscan.inference import (
    BackendFailure,
    BackendRegistry,
    CascadeConfig,
    ExternalProcessBackend,
    LowConfidenceInstrument,
    NoBackendForInstrument,
    Stage1,
    Stage2,
    UnknownLabel,
    inspect,
    register_stub_cascade,
    validate_config,
)
from surgscan.service.config import ServiceConfig
from surgscan.service.store import (
    AlreadyAssigned,
    Batch,
    InactiveAccount,
    InvalidCredentials,
    Store,
    UnknownBatch,
    UnknownUser,
    User,
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


class LoginRequest(BaseModel):
    email: str
    password: str


class UserPatch(BaseModel):
    status: Optional[str] = None
    name: Optional[str] = None
    role: Optional[str] = None


def _instrument_slug(instrument: InstrumentClass) -> str:
    return instrument.value.lower().replace(" ", "-")


def build_cascade(
    config: ServiceConfig, registry: Optional[BackendRegistry] = None
) -> tuple[BackendRegistry, CascadeConfig]:
    """Wire the configured backend kind into a validated cascade."""
    registry = registry or BackendRegistry()
    if config.backend == "stub":
        cascade = register_stub_cascade(registry)
    else:
        registry.register(
            "external-instrument",
            Stage1(),
            ExternalProcessBackend("external-instrument", config.external_stage1_command),
        )
        mapping = {}
        for instrument in InstrumentClass:
            backend_id = f"external-defect-{_instrument_slug(instrument)}"
            registry.register(
                backend_id,
                Stage2(instrument),
                ExternalProcessBackend(backend_id, config.external_defect_command),
            )
            mapping[instrument] = backend_id
        cascade = CascadeConfig(stage1_backend="external-instrument", defect_backends=mapping)
    cascade = replace(
        cascade,
        instrument_threshold=config.instrument_threshold,
        defect_threshold=config.defect_threshold,
    )
    validate_config(cascade, registry)
    return registry, cascade


def _user_json(user: User, batch_count: Optional[int] = None) -> dict:
    out = {
        "id": user.id,
        "name": user.name,
        "email": user.email,
        "role": user.role,
        "status": user.status,
    }
    if batch_count is not None:
        out["batch_count"] = batch_count
    return out


def _batch_json(batch: Batch) -> dict:
    return {
        "batch_number": batch.batch_number,
        "state": batch.state,
        "created_at": batch.created_at,
    }


def create_app(config: ServiceConfig, registry: Optional[BackendRegistry] = None) -> FastAPI:
    store = Store(config.database_path, config.images_dir)
    store.seed_users(config.users)
    registry, cascade = build_cascade(config, registry)

    app = FastAPI(title="SurgScan service", version=__version__)
    app.state.store = store
    app.state.config = config
    app.state.cascade = cascade
    app.state.registry = registry

    def current_user(request: Request) -> User:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise ApiError(401, "Unauthorized", "missing bearer token")
        user = store.user_for_token(header[7:].strip())
        if user is None:
            raise ApiError(401, "Unauthorized", "invalid token")
        if not user.is_active:
            raise ApiError(403, "InactiveAccount", "account is deactivated")
        return user

    def require_admin(request: Request) -> User:
        user = current_user(request)
        if not user.is_admin:
            raise ApiError(403, "NonAdmin", "admin role required")
        return user

    def batch_or_404(batch_number: str) -> Batch:
        try:
            return store.get_batch(batch_number)
        except UnknownBatch as exc:
            raise ApiError(404, "UnknownBatch", str(exc)) from exc

    def readable_batch(request: Request, batch_number: str) -> tuple[User, Batch]:
        user = current_user(request)
        batch = batch_or_404(batch_number)
        if batch.owner_id != user.id and not user.is_admin:
            raise ApiError(403, "Forbidden", "not your batch")
        return user, batch

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"error": "ValidationError", "message": str(exc.errors())}
        )

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, exc: StarletteHTTPException):
        names = {
            400: "BadRequest",
            401: "Unauthorized",
            403: "Forbidden",
            404: "NotFound",
            405: "MethodNotAllowed",
            500: "ServerError",
        }
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": names.get(exc.status_code, "Error"), "message": str(exc.detail)},
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/api/login")
    def login(body: LoginRequest):
        try:
            user = store.authenticate(body.email, body.password)
        except InvalidCredentials as exc:
            raise ApiError(401, "InvalidCredentials", str(exc)) from exc
        except InactiveAccount as exc:
            raise ApiError(403, "InactiveAccount", str(exc)) from exc
        token = store.create_session(user.id)
        open_batch = store.open_batch_for(user.id)
        return {
            "token": token,
            "role": user.role,
            "user": _user_json(user),
            "open_batch": open_batch.batch_number if open_batch else None,
        }

    @app.post("/api/batches")
    def create_batch(request: Request):
        user = current_user(request)
        try:
            batch = store.create_batch(user.id)
        except AlreadyAssigned as exc:
            raise ApiError(409, "AlreadyAssigned", str(exc)) from exc
        return _batch_json(batch)

    @app.post("/api/batches/{batch_number}/images")
    async def upload_image(batch_number: str, request: Request, file: UploadFile = File(...)):
        user = current_user(request)
        batch = batch_or_404(batch_number)
        if batch.owner_id != user.id:
            raise ApiError(403, "NotOwner", "only the batch owner can upload")
        if batch.state != "Open":
            raise ApiError(409, "BatchClosed", f"batch {batch_number} is closed")
        data = await file.read()
        filename = file.filename or "upload"
        try:
            img = decode_image(data)
        except UnsupportedImage as exc:
            raise ApiError(400, "BadImage", str(exc)) from exc
        img = resize_preserve_aspect(img, config.resize_long_side)
        img = unsharp_mask(img, config.unsharp_radius, config.unsharp_amount)
        stored = store.store_image_bytes(png_bytes(img))
        try:
            result = inspect(img, cascade, registry)
        except LowConfidenceInstrument as exc:
            image_id = store.add_image(
                batch.id, filename, stored, failure=f"LowConfidenceInstrument: {exc}"
            )
            return {
                "image_id": image_id,
                "original_filename": filename,
                "batch_number": batch.batch_number,
                "result": None,
                "failure": {
                    "error": "LowConfidenceInstrument",
                    "message": str(exc),
                    "instrument_guess": exc.verdict.label,
                    "confidence": exc.verdict.confidence,
                },
            }
        except (BackendFailure, NoBackendForInstrument, UnknownLabel) as exc:
            store.add_image(batch.id, filename, stored, failure=f"{type(exc).__name__}: {exc}")
            raise ApiError(500, type(exc).__name__, str(exc)) from exc
        image_id = store.add_image(batch.id, filename, stored, result_json=result.to_json())
        return {
            "image_id": image_id,
            "original_filename": filename,
            "batch_number": batch.batch_number,
            "result": result.to_json(),
        }

    @app.get("/api/batches/{batch_number}/stats")
    def batch_stats(batch_number: str, request: Request):
        _, batch = readable_batch(request, batch_number)
        stats = store.batch_stats(batch.id)
        return {**_batch_json(batch), **stats.to_json()}

    @app.get("/api/batches/{batch_number}")
    def batch_detail(batch_number: str, request: Request):
        _, batch = readable_batch(request, batch_number)
        owner = store.get_user(batch.owner_id)
        images = [
            {
                "id": image["id"],
                "original_filename": image["original_filename"],
                "uploaded_at": image["uploaded_at"],
                "result": image["result"],
                "failure": image["failure"],
            }
            for image in store.batch_images(batch.id)
        ]
        return {
            **_batch_json(batch),
            "owner": {"id": owner.id, "name": owner.name},
            "images": images,
            "stats": store.batch_stats(batch.id).to_json(),
        }

    @app.post("/api/batches/{batch_number}/close")
    def close_batch(batch_number: str, request: Request):
        user = current_user(request)
        batch = batch_or_404(batch_number)
        if batch.owner_id != user.id and not user.is_admin:
            raise ApiError(403, "Forbidden", "not your batch")
        return _batch_json(store.close_batch(batch_number))

    @app.get("/api/admin/users")
    def admin_users(request: Request):
        require_admin(request)
        rows = store.list_users_with_batch_counts()
        return {"users": [_user_json(user, count) for user, count in rows]}

    @app.patch("/api/admin/users/{user_id}")
    def admin_patch_user(user_id: int, body: UserPatch, request: Request):
        require_admin(request)
        try:
            user = store.update_user(user_id, status=body.status, name=body.name, role=body.role)
        except UnknownUser as exc:
            raise ApiError(404, "UnknownUser", str(exc)) from exc
        except ValueError as exc:
            raise ApiError(400, "ValidationError", str(exc)) from exc
        return _user_json(user)

    @app.get("/api/admin/overview")
    def admin_overview(request: Request):
        require_admin(request)
        batches = []
        for batch in store.list_batches():
            owner = store.get_user(batch.owner_id)
            batches.append(
                {
                    **_batch_json(batch),
                    "owner": {"id": owner.id, "name": owner.name},
                    "stats": store.batch_stats(batch.id).to_json(),
                }
            )
        return {"batches": batches}

    return app
