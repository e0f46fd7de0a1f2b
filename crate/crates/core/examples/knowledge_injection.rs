//! Shows the soft-token average and its effect on the mask vector.

use kgprompt::encoder::{EncoderConfig, HashedEncoder};
use kgprompt::predict::{forward, mask_representation};
use kgprompt::prompt::{apply_template, finalize_prompt, resolve_template, update_soft};
use kgprompt::Encoder;

fn main() -> anyhow::Result<()> {
    let enc = HashedEncoder::new(&EncoderConfig::default())?;
    let template = resolve_template("default")?;
    let base = apply_template(&template, "poorly controlled T2DM", &enc);

    let k = enc.encode_passage("Type 2 Diabetes reaches High Blood Sugar through causes.");
    let injected = update_soft(&base, std::slice::from_ref(&k))?;
    let s = base.soft_indices[0];
    println!("soft[0..4] before {:?}", &base.vectors[s].as_slice()[..4]);
    println!("soft[0..4] after  {:?}", &injected.vectors[s].as_slice()[..4]);

    let mask = |inst| -> anyhow::Result<_> {
        let inst = finalize_prompt(inst)?;
        Ok(mask_representation(&inst, &forward(&inst, &enc)?))
    };
    let (plain, with_k) = (mask(base)?, mask(injected)?);
    println!("cosine(mask without, mask with knowledge) = {:.4}", plain.dot(&with_k));
    Ok(())
}
