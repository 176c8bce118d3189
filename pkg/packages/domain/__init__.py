"""领域层：枚举、异常与 pydantic 配置模型。"""
