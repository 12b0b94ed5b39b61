"""Association negotiation policy."""
from __future__ import annotations

from dataclasses import dataclass

from ..dicom import (
    CT_IMAGE_STORAGE,
    IMPLEMENTATION_CLASS_UID,
    MR_IMAGE_STORAGE,
    SECONDARY_CAPTURE_STORAGE,
    SUPPORTED_TRANSFER_SYNTAXES,
    VERIFICATION_SOP_CLASS,
)
from .pdu import (
    AcceptedContext,
    AssociateAc,
    AssociateRj,
    AssociateRq,
    CONTEXT_ABSTRACT_UNSUPPORTED,
    CONTEXT_ACCEPTED,
    CONTEXT_TRANSFER_UNSUPPORTED,
)

MAX_PDU_FLOOR = 4096

DEFAULT_ABSTRACT_SYNTAXES = frozenset({
    VERIFICATION_SOP_CLASS,
    CT_IMAGE_STORAGE,
    MR_IMAGE_STORAGE,
    SECONDARY_CAPTURE_STORAGE,
})


@dataclass(frozen=True)
class AssociationConfig:
    called_ae: str = "MINIPACS"
    calling_ae: str = "MIRNODE"
    max_pdu_length: int = 16384
    supported_abstract_syntaxes: frozenset[str] = DEFAULT_ABSTRACT_SYNTAXES
    supported_transfer_syntaxes: frozenset[str] = frozenset(SUPPORTED_TRANSFER_SYNTAXES)
    assoc_timeout: float = 10.0
    idle_timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.max_pdu_length < MAX_PDU_FLOOR:
            raise ValueError(f"max_pdu_length below the {MAX_PDU_FLOOR}-byte floor")


def accept_association(rq: AssociateRq, cfg: AssociationConfig) -> AssociateAc | AssociateRj:
    """Apply the acceptance policy to a decoded A-ASSOCIATE-RQ."""
    if rq.called_ae != cfg.called_ae:
        # result 1 = rejected-permanent, source 1 = service user,
        # reason 7 = called AE title not recognized
        return AssociateRj(result=1, source=1, reason=7)
    contexts: list[AcceptedContext] = []
    for ctx in rq.contexts:
        if ctx.abstract_syntax not in cfg.supported_abstract_syntaxes:
            contexts.append(AcceptedContext(ctx.id, CONTEXT_ABSTRACT_UNSUPPORTED, ""))
            continue
        chosen = next(
            (ts for ts in ctx.transfer_syntaxes
             if ts in cfg.supported_transfer_syntaxes),
            None,
        )
        if chosen is None:
            contexts.append(AcceptedContext(ctx.id, CONTEXT_TRANSFER_UNSUPPORTED, ""))
        else:
            contexts.append(AcceptedContext(ctx.id, CONTEXT_ACCEPTED, chosen))
    return AssociateAc(
        called_ae=rq.called_ae,
        calling_ae=rq.calling_ae,
        contexts=tuple(contexts),
        max_pdu_length=min(rq.max_pdu_length, cfg.max_pdu_length),
        implementation_class_uid=IMPLEMENTATION_CLASS_UID,
    )
