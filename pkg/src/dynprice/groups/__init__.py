from dynprice.errors import InputError


def get_group(name, **kwargs):
    if name == "hems":
        from .hems_group import HemsGroup
        return HemsGroup(**kwargs)
    elif name == "sm":
        from .sm_group import SmartMeterGroup
        return SmartMeterGroup(**kwargs)
    elif name == "none":
        from .none_group import NoneGroup
        return NoneGroup(**kwargs)
    else:
        raise InputError(f"Unknown group: {name}")
